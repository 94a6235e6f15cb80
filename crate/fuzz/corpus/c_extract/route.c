#include <string.h>
#include "trp.h"

static int iface_cost(const struct trp_state *st, int ifindex)
{
    int i;

    for (i = 0; i < st->n_ifaces; i++)
        if (st->ifaces[i].index == ifindex)
            return st->ifaces[i].cost > 0 ? st->ifaces[i].cost : 1;
    return 1;
}

int validate_entry(const struct trp_entry *e)
{
    if (e->plen > 32)
        return 0;
    if (e->metric > TRP_INFINITY)
        return 0;
    if ((e->prefix & 0xf0000000u) == 0xe0000000u)
        return 0;
    return 1;
}

int metric_add(int metric, int cost)
{
    int m = metric + cost;

    return m > TRP_INFINITY ? TRP_INFINITY : m;
}

struct route *route_find(struct trp_state *st, uint32_t prefix, uint8_t plen)
{
    int i;

    for (i = 0; i < TRP_MAX_ROUTES; i++) {
        struct route *r = &st->routes[i];

        if (r->in_use && r->prefix == prefix && r->plen == plen)
            return r;
    }
    return NULL;
}

struct route *route_alloc(struct trp_state *st)
{
    int i;

    for (i = 0; i < TRP_MAX_ROUTES; i++) {
        if (!st->routes[i].in_use) {
            memset(&st->routes[i], 0, sizeof(st->routes[i]));
            st->routes[i].in_use = 1;
            return &st->routes[i];
        }
    }
    return NULL;
}

void route_update(struct trp_state *st, const struct trp_entry *e, uint32_t from, int ifindex)
{
    struct route *r = route_find(st, e->prefix, e->plen);
    int metric = metric_add(e->metric, iface_cost(st, ifindex));

    if (r == NULL) {
        if (metric == TRP_INFINITY)
            return;
        r = route_alloc(st);
        if (r == NULL)
            return;
        r->prefix = e->prefix;
        r->plen = e->plen;
        r->metric = (uint8_t)metric;
        r->nexthop = from;
        r->ifindex = ifindex;
        r->timeout_at = st->now + ROUTE_TIMEOUT;
        r->changed = 1;
        schedule_triggered(st);
        return;
    }
    if (r->nexthop == from) {
        r->timeout_at = st->now + ROUTE_TIMEOUT;
        if (metric != r->metric) {
            r->metric = (uint8_t)metric;
            r->changed = 1;
            if (metric == TRP_INFINITY)
                route_expire(st, r);
            else
                schedule_triggered(st);
        }
    } else if (metric < r->metric) {
        r->metric = (uint8_t)metric;
        r->nexthop = from;
        r->ifindex = ifindex;
        r->timeout_at = st->now + ROUTE_TIMEOUT;
        r->gc_at = 0;
        r->changed = 1;
        schedule_triggered(st);
    }
}
