#include <stddef.h>
#include "expr.h"

static struct node *parse_term(struct lexer *lx, arena_t *a);
static struct node *parse_factor(struct lexer *lx, arena_t *a);

static int accept(struct lexer *lx, enum tok_kind k)
{
    if (lx->cur.kind != k)
        return 0;
    lex_next(lx);
    return 1;
}

static int expect(struct lexer *lx, enum tok_kind k)
{
    if (accept(lx, k))
        return 1;
    report("unexpected token", lx->cur.kind, k);
    return 0;
}

struct node *node_new(arena_t *a, int op, struct node *l, struct node *r)
{
    struct node *n;

    if (a->used == MAX_NODES) {
        report("arena exhausted");
        return NULL;
    }
    n = &a->nodes[a->used++];
    n->op = op;
    n->left = l;
    n->right = r;
    n->value = 0;
    return n;
}

static struct node *leaf(arena_t *a, long v)
{
    struct node *n = node_new(a, 0, NULL, NULL);

    if (n)
        n->value = v;
    return n;
}

struct node *parse_expr(struct lexer *lx, arena_t *a)
{
    struct node *n = parse_term(lx, a);

    for (;;) {
        if (accept(lx, TOK_PLUS))
            n = node_new(a, '+', n, parse_term(lx, a));
        else if (accept(lx, TOK_MINUS))
            n = node_new(a, '-', n, parse_term(lx, a));
        else
            return n;
    }
}

static struct node *parse_term(struct lexer *lx, arena_t *a)
{
    struct node *n = parse_factor(lx, a);

    while (lx->cur.kind == TOK_STAR || lx->cur.kind == TOK_SLASH) {
        int op = lx->cur.kind == TOK_STAR ? '*' : '/';
        lex_next(lx);
        n = node_new(a, op, n, parse_factor(lx, a));
    }
    return n;
}

static struct node *parse_factor(struct lexer *lx, arena_t *a)
{
    long v;

    if (lx->cur.kind == TOK_NUM) {
        v = lx->cur.value;
        lex_next(lx);
        return leaf(a, v);
    }
    if (accept(lx, TOK_MINUS))
        return node_new(a, 'n', parse_factor(lx, a), NULL);
    if (expect(lx, TOK_LP)) {
        struct node *inner = parse_expr(lx, a);
        expect(lx, TOK_RP);
        return inner;
    }
    return NULL;
}
