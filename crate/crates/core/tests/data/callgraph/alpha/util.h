#ifndef UTIL_H
#define UTIL_H

#include <stddef.h>

#define MAX_NAME 32
#define SQUARE(x) ((x) * (x))

typedef unsigned int u32;

struct buffer {
    char data[256];
    size_t len;
};

enum level {
    LEVEL_DEBUG,
    LEVEL_INFO,
    LEVEL_ERROR
};

typedef int (*visit_fn)(int value, void *arg);

int fact(int n);
int is_even(unsigned n);
int is_odd(unsigned n);
void log_msg(enum level lvl, const char *fmt, ...);
int buf_append(struct buffer *b, const char *s, size_t n);
int walk(const int *values, size_t n, visit_fn fn, void *arg);

#endif
