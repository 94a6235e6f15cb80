#include "../../core/queue.h"

static struct queue backlog;

int driver_init(int port)
{
    (void)port;
    backlog.head = backlog.tail = 0;
    return 0;
}

int driver_send(const struct frame *f)
{
    return queue_push(&backlog, f) == 0 ? f->len : -1;
}

int loop_pending(void)
{
    return !QUEUE_EMPTY(&backlog);
}

int ackermann(int m, int n)
{
    if (m == 0)
        return n + 1;
    if (n == 0)
        return ackermann(m - 1, 1);
    return ackermann(m - 1, ackermann(m, n - 1));
}
