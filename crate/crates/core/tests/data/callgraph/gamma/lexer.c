#include "expr.h"

static int is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n';
}

static char peek(const struct lexer *lx)
{
    return lx->src[lx->pos];
}

static char advance(struct lexer *lx)
{
    return lx->src[lx->pos++];
}

static void skip_space(struct lexer *lx)
{
    while (is_space(peek(lx)))
        advance(lx);
}

static long number(struct lexer *lx)
{
    long v = 0;

    while (IS_DIGIT(peek(lx)))
        v = v * 10 + (advance(lx) - '0');
    return v;
}

static enum tok_kind punct(char c)
{
    switch (c) {
    case '+': return TOK_PLUS;
    case '-': return TOK_MINUS;
    case '*': return TOK_STAR;
    case '/': return TOK_SLASH;
    case '(': return TOK_LP;
    case ')': return TOK_RP;
    default: return TOK_ERR;
    }
}

void lex_init(struct lexer *lx, const char *src)
{
    lx->src = src;
    lx->pos = 0;
    lex_next(lx);
}

void lex_next(struct lexer *lx)
{
    char c;

    skip_space(lx);
    c = peek(lx);
    if (c == '\0') {
        lx->cur.kind = TOK_END;
    } else if (IS_DIGIT(c)) {
        lx->cur.kind = TOK_NUM;
        lx->cur.value = number(lx);
    } else {
        lx->cur.kind = punct(advance(lx));
        if (lx->cur.kind == TOK_ERR)
            report("bad character", c);
    }
}
