#include "../../core/queue.h"

static int ports[4];

static int checksum(const unsigned char *p, int len)
{
    int sum = 0;

    while (len-- > 0)
        sum += *p++;
    return sum & 0xffff;
}

int driver_init(int port)
{
    ports[port & 3] = 1;
    trace("eth port %d up", port);
    return 0;
}

int driver_send(const struct frame *f)
{
    if (!ports[f->port & 3])
        return -1;
    return checksum(f->bytes, f->len) >= 0 ? f->len : -1;
}
