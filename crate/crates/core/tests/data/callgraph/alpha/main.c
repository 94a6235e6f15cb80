#include <stdio.h>
#include "util.h"

int sum_squares(int a, int b);
int clamp(int v, int lo, int hi);
int dump(const int *values, size_t n);

static void usage(const char *prog)
{
    printf("usage: %s N\n", prog);
}

static int parse(const char *s)
{
    int v = 0;

    while (*s >= '0' && *s <= '9')
        v = v * 10 + (*s++ - '0');
    return v;
}

int main(int argc, char **argv)
{
    int values[4];
    int n;

    if (argc < 2) {
        usage(argv[0]);
        return 1;
    }
    n = clamp(parse(argv[1]), 0, 12);
    values[0] = fact(n);
    values[1] = is_even((unsigned)n);
    values[2] = sum_squares(n, n + 1);
    values[3] = clamp(n, 1);
    return dump(values, 4) > 0 ? 0 : 1;
}
