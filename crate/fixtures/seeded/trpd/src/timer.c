#include <stdlib.h>
#include <string.h>
#include "trp.h"

void route_expire(struct trp_state *st, struct route *r)
{
    r->metric = TRP_INFINITY;
    r->changed = 1;
    r->gc_at = st->now + GC_TIMEOUT;
    schedule_triggered(st);
}

static void route_delete(struct route *r)
{
    memset(r, 0, sizeof(*r));
}

static void broadcast(struct trp_state *st, int changed_only)
{
    int i;

    for (i = 0; i < st->n_ifaces; i++)
        send_response(st, st->ifaces[i].index, 0xe0000009u, TRP_PORT, changed_only);
}

void timers_run(struct trp_state *st)
{
    int i;

    for (i = 0; i < TRP_MAX_ROUTES; i++) {
        struct route *r = &st->routes[i];

        if (!r->in_use)
            continue;
        if (r->gc_at && st->now >= r->gc_at)
            route_delete(r);
        else if (!r->gc_at && st->now >= r->timeout_at)
            route_expire(st, r);
    }
    if (st->now >= st->next_update) {
        broadcast(st, 0);
        st->next_update = st->now + UPDATE_INTERVAL;
        st->triggered_pending = 0;
    } else if (st->triggered_pending && st->now >= st->next_triggered) {
        broadcast(st, 1);
        st->triggered_pending = 0;
        st->next_triggered = st->now + 1 + rand_r(&st->seed) % 5;
    }
}
