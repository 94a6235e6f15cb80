#ifndef TRP_H
#define TRP_H

#include <stddef.h>
#include <stdint.h>

#define TRP_PORT 520
#define TRP_VERSION 1
#define TRP_INFINITY 16
#define TRP_MAX_ENTRIES 25
#define TRP_MAX_ROUTES 128
#define TRP_MAX_IFACES 8

#define CMD_REQUEST 1
#define CMD_RESPONSE 2

/* Timers, in seconds. */
#define UPDATE_INTERVAL 30
#define ROUTE_TIMEOUT 180
#define GC_TIMEOUT 60

struct trp_header {
    uint8_t command;
    uint8_t version;
    uint16_t zero;
};

struct trp_entry {
    uint32_t prefix;
    uint8_t plen;
    uint8_t metric;
    uint16_t tag;
};

struct trp_packet {
    struct trp_header hdr;
    size_t count;
    struct trp_entry entries[TRP_MAX_ENTRIES];
};

struct route {
    uint32_t prefix;
    uint8_t plen;
    uint8_t metric;
    uint32_t nexthop;
    int ifindex;
    int changed;
    long timeout_at;
    long gc_at;
    int in_use;
};

struct iface {
    int index;
    uint32_t addr;
    int cost;
};

struct trp_state {
    struct route routes[TRP_MAX_ROUTES];
    struct iface ifaces[TRP_MAX_IFACES];
    int n_ifaces;
    long now;
    long next_update;
    long next_triggered;
    int triggered_pending;
    unsigned int seed;
};

/* packet.c */
int trp_decode(const uint8_t *buf, size_t len, struct trp_packet *out);
size_t trp_encode(const struct trp_packet *pkt, uint8_t *buf, size_t cap);
int header_ok(const struct trp_header *hdr);

/* route.c */
struct route *route_find(struct trp_state *st, uint32_t prefix, uint8_t plen);
struct route *route_alloc(struct trp_state *st);
int validate_entry(const struct trp_entry *e);
int metric_add(int metric, int cost);
void route_update(struct trp_state *st, const struct trp_entry *e, uint32_t from, int ifindex);

/* input.c */
void trp_input(struct trp_state *st, const uint8_t *buf, size_t len, uint32_t from, uint16_t sport, int ifindex);

/* timer.c */
void timers_run(struct trp_state *st);
void route_expire(struct trp_state *st, struct route *r);

/* output.c */
void schedule_triggered(struct trp_state *st);
int send_packet(int ifindex, uint32_t to, uint16_t port, const uint8_t *buf, size_t len);
void send_response(struct trp_state *st, int ifindex, uint32_t to, uint16_t port, int changed_only);

#endif
