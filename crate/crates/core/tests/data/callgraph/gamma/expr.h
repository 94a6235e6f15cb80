#ifndef EXPR_H
#define EXPR_H

#define MAX_NODES 128
#define IS_DIGIT(c) ((c) >= '0' && (c) <= '9')

enum tok_kind { TOK_NUM, TOK_PLUS, TOK_MINUS, TOK_STAR, TOK_SLASH, TOK_LP, TOK_RP, TOK_END, TOK_ERR };

struct token {
    enum tok_kind kind;
    long value;
};

struct lexer {
    const char *src;
    int pos;
    struct token cur;
};

struct node {
    int op;
    long value;
    struct node *left;
    struct node *right;
};

typedef struct arena {
    struct node nodes[MAX_NODES];
    int used;
} arena_t;

struct node *parse_expr(struct lexer *lx, arena_t *a);
long eval(const struct node *n);
int depth(const struct node *n);
void lex_init(struct lexer *lx, const char *src);
void lex_next(struct lexer *lx);
struct node *node_new(arena_t *a, int op, struct node *l, struct node *r);
void report(const char *what, ...);

#endif
