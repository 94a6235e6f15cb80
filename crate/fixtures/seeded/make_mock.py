"""Writes mock.json, the scripted model used to record the seeded cassettes."""
import json

rules = []


def rule(purpose, response, *contains, times=None):
    r = {"purpose": purpose, "response": response}
    if contains:
        r["contains"] = list(contains)
    if times:
        r["times"] = times
    rules.append(r)


def block(obj):
    return "```json\n" + json.dumps(obj) + "\n```"


functions = {
    "get16": "Reads a big-endian 16-bit value from a byte buffer.",
    "get32": "Reads a big-endian 32-bit value from a byte buffer.",
    "put16": "Writes a 16-bit value into a buffer in network byte order.",
    "put32": "Writes a 32-bit value into a buffer in network byte order.",
    "header_ok": "Accepts a TRP header only when the version is 1 and the command is Request or Response.",
    "trp_decode": "Decodes a TRP datagram into a header and up to 25 eight-octet route entries, rejecting truncated or oversized messages.",
    "trp_encode": "Serializes a packet into wire format, always writing version 1 and zero padding.",
    "iface_cost": "Returns the configured cost of an interface, defaulting to 1.",
    "validate_entry": "Checks a received route entry: prefix length at most 32, metric not above infinity (16), and no multicast prefix.",
    "metric_add": "Adds an interface cost to a metric, capping the result at infinity (16).",
    "route_find": "Looks up the route table entry for a prefix and prefix length.",
    "route_alloc": "Claims a free slot in the fixed-size route table.",
    "route_update": "Applies a received route entry: adds interface cost, installs new routes, refreshes or replaces existing ones, expires routes that became unreachable and schedules triggered updates.",
    "from_neighbor": "Rejects datagrams sent from one of the router's own interface addresses.",
    "handle_request": "Answers a Request by sending the full table to the requester's address and port.",
    "handle_response": "Processes a Response from a neighbor: validates each entry and feeds it to the route table update.",
    "trp_input": "Entry point for received datagrams: decodes, checks the header and dispatches Requests and Responses.",
    "route_expire": "Marks a timed-out route unreachable (metric 16), flags it changed, starts its garbage-collection timer and schedules a triggered update.",
    "route_delete": "Clears a route table slot.",
    "broadcast": "Sends a Response on every interface to the TRP multicast group.",
    "timers_run": "Periodic timer handler: deletes garbage-collected routes, expires timed-out routes, sends regular updates every 30 seconds and rate-limits triggered updates with a random 1-5 second hold-down.",
    "schedule_triggered": "Marks a triggered update as pending.",
    "send_packet": "Transmits an encoded datagram (stub).",
    "send_response": "Builds and sends Response messages with the route table (or only changed routes), applying poisoned reverse, and clears change flags.",
}
for name, text in functions.items():
    rule("index.function", text, f"Function: {name}\n")
files = {
    "src/packet.c": "Wire format: decoding and encoding of TRP headers and route entries, plus header validation.",
    "src/route.c": "Route table: entry validation, metric arithmetic, lookup, allocation and the update rules for received routes.",
    "src/input.c": "Input path: dispatches received Requests and Responses and filters datagrams from the router itself.",
    "src/timer.c": "Timers: route timeout and garbage collection, periodic updates and triggered-update rate limiting.",
    "src/output.c": "Output path: builds Response messages from the route table and transmits them.",
}
for path, text in files.items():
    rule("index.file", text, f"source file {path}.")
rule("index.directory", "The TRP daemon sources: message codec, route table, input processing, timers and output.")
rule("index.repo", "trpd is a small TRP routing daemon; all code lives in src/.")

spec = {
    "2.1": [
        ("The version field of every sent message must be 1.", "MUST", "The version field MUST be set to 1."),
        ("A received message whose version is not 1 must be silently discarded.", "MUST",
         "A\n   received message whose version field is not 1 MUST be silently\n   discarded."),
    ],
    "2.2": [("A received route entry with a metric outside 1..16 must be ignored.", "MUST",
             "An entry whose metric is\n   outside this range MUST be ignored.")],
    "3.1": [("Responses whose source port is not 520 must be ignored.", "MUST",
             "Responses that are not sent from the TRP port (520) MUST be ignored.")],
    "3.2": [("The metric of a received entry must be increased by the incoming interface cost and capped at 16.",
             "MUST", "its metric MUST be increased\n   by the cost of the incoming interface")],
    "3.3": [("When a route times out its metric must become 16 and its garbage-collection timer must be 120 seconds.",
             "MUST", "When\n   a route times out, its metric MUST be set to 16 and its\n   garbage-collection timer MUST be set to 120 seconds.")],
    "3.4": [("After a triggered update, the next triggered update must wait a random 1 to 5 seconds.", "MUST_NOT",
             "After a triggered update has been sent, another triggered update\n   MUST NOT be sent until a random interval between 1 and 5 seconds\n   has elapsed.")],
    "3.5": [("The routing table must not hold two routes for the same prefix and length.", "MUST_NOT",
             "The routing table MUST NOT contain more than one route for the same\n   destination prefix and prefix length.")],
}
headings = {"2.1": "Header", "2.2": "Route Entries", "3.1": "Input Validation", "3.2": "Metric Computation",
            "3.3": "Route Timeout", "3.4": "Triggered Updates", "3.5": "Route Uniqueness"}
for sec, props in spec.items():
    reply = {"properties": [{"statement": s, "modality": m, "excerpt": e} for s, m, e in props]}
    rule("rfc.extract", block(reply), f"Section {sec} {headings[sec]}\n")

rule("agent.localize", block({"selected": ["src/"], "reason": "all code is under src/"}), "You are at repository")

# property -> {file: [functions]}
plan = {
    "2.1:1": {"packet.c": ["trp_encode", "header_ok"]},
    "2.1:2": {"input.c": ["trp_input"], "packet.c": ["header_ok"]},
    "2.2:1": {"route.c": ["validate_entry"], "input.c": ["handle_response"]},
    "3.1:1": {"input.c": ["handle_response", "trp_input"]},
    "3.2:1": {"route.c": ["route_update"]},
    "3.3:1": {"timer.c": ["route_expire", "timers_run"]},
    "3.4:1": {"timer.c": ["timers_run"], "output.c": ["schedule_triggered"]},
    "3.5:1": {"route.c": ["route_update", "route_find"]},
}
for pid, files in plan.items():
    tag = f"(RFC9999:{pid},"
    rule("agent.localize", block({"selected": list(files), "reason": "files that handle this requirement"}),
         tag, "You are at directory src.")
    for f, funs in files.items():
        rule("agent.localize", block({"selected": funs, "reason": "these functions implement the behavior"}),
             tag, f"You are at file src/{f}.")


def detect(pid, obj, times=None):
    rule("agent.detect", block(obj), f"(RFC9999:{pid},", times=times)


def validate(pid, confirmed, rationale):
    rule("agent.validate", block({"confirmed": confirmed, "rationale": rationale, "additional": []}),
         f"(RFC9999:{pid},")


detect("2.1:1", {"decision": "conformant",
                 "explanation": "trp_encode writes TRP_VERSION (1) into the version octet of every message."})
detect("2.1:2", {"decision": "conformant",
                 "explanation": "trp_input drops any message for which header_ok fails, and header_ok rejects versions other than 1."})
detect("2.2:1", {"decision": "violation",
                 "explanation": "validate_entry rejects metrics above 16 but accepts metric 0, which is outside the 1..16 range; such entries reach route_update.",
                 "implicated": [{"function": "validate_entry", "path": "src/route.c"}]})
validate("2.2:1", True, "validate_entry has no lower bound check, so metric 0 is accepted.")
detect("3.1:1", {"decision": "violation",
                 "explanation": "handle_response ignores its sport argument, so Responses from any source port are processed.",
                 "implicated": [{"function": "handle_response", "path": "src/input.c"}]})
validate("3.1:1", True, "sport is explicitly discarded with (void)sport; no port 520 check exists on the response path.")
detect("3.2:1", {"decision": "insufficient", "explanation": "route_update calls metric_add; its definition is needed.",
                 "tools": [{"tool": "query_callee", "caller": "route_update", "callee": "metric_add"}]}, times=1)
detect("3.2:1", {"decision": "conformant",
                 "explanation": "route_update adds iface_cost via metric_add, which caps the sum at TRP_INFINITY (16)."})
detect("3.3:1", {"decision": "insufficient", "explanation": "route_expire uses GC_TIMEOUT; its value is needed.",
                 "tools": [{"tool": "query", "name": "GC_TIMEOUT"}]}, times=1)
detect("3.3:1", {"decision": "violation",
                 "explanation": "route_expire sets gc_at to now + GC_TIMEOUT, and GC_TIMEOUT is 60, not the required 120 seconds.",
                 "implicated": [{"function": "route_expire", "path": "src/timer.c"}]})
validate("3.3:1", True, "GC_TIMEOUT is defined as 60 in trp.h; the garbage-collection timer is 60 seconds.")
detect("3.4:1", {"decision": "violation",
                 "explanation": "timers_run computes the hold-down with rand_r % 5, which can be 0.",
                 "implicated": [{"function": "timers_run", "path": "src/timer.c"}]})
validate("3.4:1", False, "The hold-down is 1 + rand_r % 5, which is always between 1 and 5 seconds; the report misread the expression.")
detect("3.5:1", {"decision": "insufficient", "explanation": "Need every place that allocates routes.",
                 "tools": [{"tool": "query_caller", "function": "route_alloc"}]})

rule("agent.localize", block({"selected": [], "reason": "nothing relevant here"}))

with open("mock.json", "w") as f:
    json.dump({"rules": rules}, f, indent=1)
    f.write("\n")
print(len(rules), "rules")
