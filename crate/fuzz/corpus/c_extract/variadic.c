#include <stdarg.h>
#include <stdio.h>
#include <string.h>
#include "util.h"

static const char *names[] = { "debug", "info", "error" };

static int helper(const char *s, size_t n)
{
    return (int)strnlen(s, n);
}

void log_msg(enum level lvl, const char *fmt, ...)
{
    va_list ap;

    va_start(ap, fmt);
    fprintf(stderr, "[%s] ", names[lvl]);
    vfprintf(stderr, fmt, ap);
    va_end(ap);
}

int buf_append(struct buffer *b, const char *s, size_t n)
{
    int len = helper(s, n);

    if (b->len + (size_t)len > sizeof(b->data)) {
        log_msg(LEVEL_ERROR, "buffer full (%zu)\n", b->len);
        return -1;
    }
    memcpy(b->data + b->len, s, (size_t)len);
    b->len += (size_t)len;
    return len;
}

int walk(const int *values, size_t n, visit_fn fn, void *arg)
{
    size_t i;
    int total = 0;

    for (i = 0; i < n; i++)
        total += fn(values[i], arg);
    return total;
}

static int print_value(int value, void *arg)
{
    struct buffer *b = arg;
    char tmp[MAX_NAME];

    snprintf(tmp, sizeof(tmp), "%d,", value);
    return buf_append(b, tmp, sizeof(tmp));
}

int dump(const int *values, size_t n)
{
    struct buffer b;

    b.len = 0;
    walk(values, n, print_value, &b);
    log_msg(LEVEL_INFO, "%.*s\n", (int)b.len, b.data);
    log_msg(LEVEL_DEBUG, "done");
    return fact(clamp((int)n, 0, 5));
}
