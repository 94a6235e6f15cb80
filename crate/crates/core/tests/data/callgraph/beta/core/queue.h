#ifndef QUEUE_H
#define QUEUE_H

#define QUEUE_LEN 64
#define QUEUE_EMPTY(q) ((q)->head == (q)->tail)

struct frame {
    unsigned char bytes[1500];
    int len;
    int port;
};

struct queue {
    struct frame slots[QUEUE_LEN];
    int head;
    int tail;
};

union addr {
    unsigned int v4;
    unsigned char raw[16];
};

int queue_push(struct queue *q, const struct frame *f);
int queue_pop(struct queue *q, struct frame *out);
int driver_send(const struct frame *f);
int driver_init(int port);
void trace(const char *fmt, ...);

#endif
