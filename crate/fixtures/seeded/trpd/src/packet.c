#include <string.h>
#include "trp.h"

static uint16_t get16(const uint8_t *p)
{
    return (uint16_t)((p[0] << 8) | p[1]);
}

static uint32_t get32(const uint8_t *p)
{
    return ((uint32_t)p[0] << 24) | ((uint32_t)p[1] << 16) | ((uint32_t)p[2] << 8) | p[3];
}

static void put16(uint8_t *p, uint16_t v)
{
    p[0] = (uint8_t)(v >> 8);
    p[1] = (uint8_t)v;
}

static void put32(uint8_t *p, uint32_t v)
{
    p[0] = (uint8_t)(v >> 24);
    p[1] = (uint8_t)(v >> 16);
    p[2] = (uint8_t)(v >> 8);
    p[3] = (uint8_t)v;
}

int header_ok(const struct trp_header *hdr)
{
    if (hdr->version != TRP_VERSION)
        return 0;
    if (hdr->command != CMD_REQUEST && hdr->command != CMD_RESPONSE)
        return 0;
    return 1;
}

int trp_decode(const uint8_t *buf, size_t len, struct trp_packet *out)
{
    size_t off = 4;

    if (len < 4 || (len - 4) % 8 != 0)
        return -1;
    memset(out, 0, sizeof(*out));
    out->hdr.command = buf[0];
    out->hdr.version = buf[1];
    out->hdr.zero = get16(buf + 2);
    while (off < len) {
        struct trp_entry *e;

        if (out->count == TRP_MAX_ENTRIES)
            return -1;
        e = &out->entries[out->count++];
        e->prefix = get32(buf + off);
        e->plen = buf[off + 4];
        e->metric = buf[off + 5];
        e->tag = get16(buf + off + 6);
        off += 8;
    }
    return 0;
}

size_t trp_encode(const struct trp_packet *pkt, uint8_t *buf, size_t cap)
{
    size_t off = 4;
    size_t i;

    if (cap < 4 + pkt->count * 8)
        return 0;
    buf[0] = pkt->hdr.command;
    buf[1] = TRP_VERSION;
    put16(buf + 2, 0);
    for (i = 0; i < pkt->count; i++) {
        const struct trp_entry *e = &pkt->entries[i];

        put32(buf + off, e->prefix);
        buf[off + 4] = e->plen;
        buf[off + 5] = e->metric;
        put16(buf + off + 6, e->tag);
        off += 8;
    }
    return off;
}
