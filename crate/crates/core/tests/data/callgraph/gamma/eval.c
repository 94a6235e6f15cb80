#include <stdarg.h>
#include <stdio.h>
#include <stdlib.h>
#include "expr.h"

static int errors;

void report(const char *what, ...)
{
    errors++;
    fprintf(stderr, "error: %s\n", what);
}

static long safe_div(long a, long b)
{
    if (b == 0) {
        report("division by zero");
        return 0;
    }
    return a / b;
}

static long apply(int op, long l, long r)
{
    switch (op) {
    case '+': return l + r;
    case '-': return l - r;
    case '*': return l * r;
    case '/': return safe_div(l, r);
    default: return 0;
    }
}

long eval(const struct node *n)
{
    if (n == NULL)
        return 0;
    if (n->op == 0)
        return n->value;
    if (n->op == 'n')
        return -eval(n->left);
    return apply(n->op, eval(n->left), eval(n->right));
}

static int max(int a, int b)
{
    return a > b ? a : b;
}

int depth(const struct node *n)
{
    return n ? 1 + max(depth(n->left), depth(n->right)) : 0;
}

static int count(const struct node *n)
{
    return n ? 1 + count(n->left) + count(n->right) : 0;
}

int error_count(void)
{
    return errors;
}

long evaluate_string(const char *src, int *nodes)
{
    struct lexer lx;
    arena_t *a = calloc(1, sizeof(*a));
    long v;

    if (a == NULL)
        return 0;
    lex_init(&lx, src);
    v = eval(parse_expr(&lx, a));
    if (nodes)
        *nodes = count(a->used ? &a->nodes[a->used - 1] : NULL);
    free(a);
    return v;
}
