#include "trp.h"

void schedule_triggered(struct trp_state *st)
{
    st->triggered_pending = 1;
}

int send_packet(int ifindex, uint32_t to, uint16_t port, const uint8_t *buf, size_t len)
{
    (void)ifindex;
    (void)to;
    (void)port;
    (void)buf;
    return (int)len;
}

void send_response(struct trp_state *st, int ifindex, uint32_t to, uint16_t port, int changed_only)
{
    struct trp_packet pkt;
    uint8_t buf[4 + TRP_MAX_ENTRIES * 8];
    size_t len;
    int i;

    pkt.hdr.command = CMD_RESPONSE;
    pkt.hdr.version = TRP_VERSION;
    pkt.count = 0;
    for (i = 0; i < TRP_MAX_ROUTES; i++) {
        struct route *r = &st->routes[i];

        if (!r->in_use || (changed_only && !r->changed))
            continue;
        pkt.entries[pkt.count].prefix = r->prefix;
        pkt.entries[pkt.count].plen = r->plen;
        pkt.entries[pkt.count].metric = r->ifindex == ifindex ? TRP_INFINITY : r->metric;
        pkt.entries[pkt.count].tag = 0;
        if (++pkt.count == TRP_MAX_ENTRIES) {
            len = trp_encode(&pkt, buf, sizeof(buf));
            send_packet(ifindex, to, port, buf, len);
            pkt.count = 0;
        }
    }
    if (pkt.count > 0 || !changed_only) {
        len = trp_encode(&pkt, buf, sizeof(buf));
        send_packet(ifindex, to, port, buf, len);
    }
    for (i = 0; i < TRP_MAX_ROUTES; i++)
        st->routes[i].changed = 0;
}
