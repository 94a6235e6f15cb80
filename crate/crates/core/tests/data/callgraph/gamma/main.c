#include <stdio.h>
#include "expr.h"

long evaluate_string(const char *src, int *nodes);
int error_count(void);

static int max(int a, int b, int c)
{
    int m = a > b ? a : b;

    return m > c ? m : c;
}

static void show(const char *src)
{
    int nodes = 0;
    long v = evaluate_string(src, &nodes);

    printf("%s = %ld (%d nodes)\n", src, v, nodes);
}

int main(int argc, char **argv)
{
    int i;

    for (i = 1; i < argc; i++)
        show(argv[i]);
    show("1 + 2 * (3 - 4)");
    printf("max %d\n", max(argc, 2, 3));
    return error_count() ? 1 : 0;
}
