#include <stdlib.h>
#include "core/queue.h"

int queue_drain(struct queue *q);
void trace_enable(int on);
int loop_pending(void);
int ackermann(int m, int n);

static struct queue out;

static int fill(int count)
{
    struct frame f;
    int i;

    for (i = 0; i < count; i++) {
        f.len = 60 + i;
        f.port = i % 2;
        if (queue_push(&out, &f) < 0)
            return i;
    }
    return count;
}

int main(void)
{
    int (*init)(int) = driver_init;

    trace_enable(getenv("TRACE") != NULL);
    init(0);
    driver_init(1);
    fill(abs(ackermann(1, 2)));
    trace("pending %d", loop_pending());
    return queue_drain(&out) > 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
