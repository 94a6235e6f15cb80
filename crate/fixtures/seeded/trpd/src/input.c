#include "trp.h"

static int from_neighbor(const struct trp_state *st, uint32_t from, int ifindex)
{
    int i;

    for (i = 0; i < st->n_ifaces; i++) {
        if (st->ifaces[i].addr == from)
            return 0;
    }
    return ifindex >= 0;
}

static void handle_request(struct trp_state *st, const struct trp_packet *pkt, uint32_t from, uint16_t sport,
                           int ifindex)
{
    if (pkt->count == 0)
        return;
    send_response(st, ifindex, from, sport, 0);
}

static void handle_response(struct trp_state *st, const struct trp_packet *pkt, uint32_t from, uint16_t sport,
                            int ifindex)
{
    size_t i;

    (void)sport;
    if (!from_neighbor(st, from, ifindex))
        return;
    for (i = 0; i < pkt->count; i++) {
        if (!validate_entry(&pkt->entries[i]))
            continue;
        route_update(st, &pkt->entries[i], from, ifindex);
    }
}

void trp_input(struct trp_state *st, const uint8_t *buf, size_t len, uint32_t from, uint16_t sport, int ifindex)
{
    struct trp_packet pkt;

    if (trp_decode(buf, len, &pkt) < 0)
        return;
    if (!header_ok(&pkt.hdr))
        return;
    switch (pkt.hdr.command) {
    case CMD_REQUEST:
        handle_request(st, &pkt, from, sport, ifindex);
        break;
    case CMD_RESPONSE:
        handle_response(st, &pkt, from, sport, ifindex);
        break;
    }
}
