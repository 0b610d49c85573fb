"""Travel-agency session simulator with switchable fault injection.

Generates the three artifacts the checking pipeline consumes: a JSON-lines
record stream (all sessions, seq-ordered), one operation trace per session
(already in model vocabulary: the session token becomes ss1), and a numeric
state trace with one block per service attempt.

Fault-free output is correct by construction: every per-session operation
trace replays Pass against the bundled agency machine, and the state trace
satisfies the eventual-allocation property.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .errors import ConfigError
from .ltl import StateTrace
from .trace_model import OpEvent, OpTrace, TraceRecord, sym

FAULT_FLAGS = ("same_supplier_retry", "skip_card_check", "wrong_trace_point")

_ACTIONS = ("book_car", "book_hotel", "unbook_car", "unbook_hotel")
_BRANDS = ("visa", "mc", "wrong")
# numeric encodings used in state-trace blocks
_BOOK_TYPE = {"book_car": 0, "book_hotel": 1, "unbook_car": 2, "unbook_hotel": 3}
_CC_TYPE = {"visa": 0, "mc": 1, "wrong": 2}
_SERVICE = {
    "book_hotel": ("H", "respBookRoom"),
    "book_car": ("C", "respBookCar"),
    "unbook_hotel": ("G", "respUnbookRoom"),
    "unbook_car": ("U", "respUnbookCar"),
}


@dataclass(frozen=True)
class SimConfig:
    n_users: int = 2
    n_hotels: int = 2
    n_car_shops: int = 2
    rooms_per_hotel: int = 1
    cars_per_shop: int = 1
    seed: int = 0
    n_sessions: int = 1
    faults: frozenset = frozenset()
    script: tuple | None = None  # per-session tuples of "action brand"

    def __post_init__(self):
        if self.n_users < 1 or self.n_hotels < 1 or self.n_car_shops < 1:
            raise ConfigError("n_users, n_hotels and n_car_shops must be >= 1")
        if self.rooms_per_hotel < 0 or self.cars_per_shop < 0:
            raise ConfigError("stock counts must be >= 0")
        if self.n_sessions < 0:
            raise ConfigError("n_sessions must be >= 0")
        for f in self.faults:
            if f not in FAULT_FLAGS:
                raise ConfigError(f"unknown fault flag {f!r}")
        if self.script is not None and len(self.script) != self.n_sessions:
            raise ConfigError(
                f"script has {len(self.script)} sessions, config says {self.n_sessions}"
            )


def load_config(text: str) -> SimConfig:
    """Build a SimConfig from its TOML file form."""
    try:
        import tomllib
    except ImportError:  # 3.10
        import tomli as tomllib

    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config file: {exc}") from exc
    known = {
        "n_users", "n_hotels", "n_car_shops", "rooms_per_hotel",
        "cars_per_shop", "seed", "n_sessions", "faults", "script",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "faults" in raw:
        raw["faults"] = frozenset(raw["faults"])
    if "script" in raw:
        raw["script"] = tuple(tuple(sess) for sess in raw["script"])
    return SimConfig(**raw)


def _parse_round(text: str):
    parts = text.split()
    if len(parts) != 2 or parts[0] not in _ACTIONS or parts[1] not in _BRANDS:
        raise ConfigError(f"bad script round {text!r}: expected '<action> <brand>'")
    return parts[0], parts[1]


class _World:
    """Business state shared across sessions."""

    def __init__(self, cfg: SimConfig):
        self.rooms = [cfg.rooms_per_hotel] * cfg.n_hotels
        self.cars = [cfg.cars_per_shop] * cfg.n_car_shops
        n = cfg.n_users
        self.hassigned = [None] * n
        self.nrooms = [0] * n
        self.cassigned = [None] * n
        self.ncars = [0] * n
        self.sticky_hotel = [None] * n
        self.sticky_shop = [None] * n

    def _pools(self, action):
        if action in ("book_hotel", "unbook_hotel"):
            return self.rooms, self.hassigned, self.nrooms, self.sticky_hotel
        return self.cars, self.cassigned, self.ncars, self.sticky_shop

    def available(self, user, action):
        stock, assigned, held, _ = self._pools(action)
        if action.startswith("book"):
            return held[user] < 3 and any(n > 0 for n in stock)
        return held[user] > 0

    def pick_supplier(self, user, action, sticky_fault):
        stock, assigned, held, sticky = self._pools(action)
        if action.startswith("unbook"):
            return assigned[user] if assigned[user] is not None else 0
        if sticky_fault and sticky[user] is not None:
            return sticky[user]
        if assigned[user] is not None:
            return assigned[user]
        for i, n in enumerate(stock):
            if n > 0:
                return i
        return 0

    def attempt(self, user, action, supplier, sticky_fault):
        """Apply one service attempt; returns (ok, held_after)."""
        stock, assigned, held, sticky = self._pools(action)
        if sticky_fault and sticky[user] is None and action.startswith("book"):
            sticky[user] = supplier
        if action.startswith("book"):
            ok = (
                held[user] < 3
                and stock[supplier] > 0
                and (assigned[user] is None or assigned[user] == supplier)
            )
            if ok:
                stock[supplier] -= 1
                held[user] += 1
                assigned[user] = supplier
        else:
            ok = held[user] > 0
            if ok:
                stock[assigned[user]] += 1
                held[user] -= 1
                if held[user] == 0:
                    assigned[user] = None
        return ok, held[user]


def _achievable(world: _World, user, session_net, sticky_fault):
    """Actions guaranteed to succeed both in the world and when the
    session's trace is replayed from the machine's initial state."""
    out = []
    for action in _ACTIONS:
        kind = "hotel" if action.endswith("hotel") else "car"
        if action.startswith("unbook"):
            if session_net[kind] > 0:
                out.append(action)
            continue
        stock, assigned, held, sticky = world._pools(action)
        if held[user] >= 3:
            continue
        target = world.pick_supplier(user, action, sticky_fault)
        if stock[target] > 0 and (assigned[user] in (None, target)):
            out.append(action)
    return out


def simulate(cfg: SimConfig):
    """Run the agency; returns (records, optrace_per_session, statetrace)."""
    rng = random.Random(cfg.seed)
    world = _World(cfg)
    sticky_fault = "same_supplier_retry" in cfg.faults
    skip_check = "skip_card_check" in cfg.faults
    early_point = "wrong_trace_point" in cfg.faults

    records: list[TraceRecord] = []
    optraces: dict[str, OpTrace] = {}
    blocks: list[dict] = []
    seq = 0

    for k in range(cfg.n_sessions):
        user = k % cfg.n_users
        user_name = f"user{user + 1}"
        token = f"{rng.getrandbits(128):032x}"
        session_net = {"hotel": 0, "car": 0}
        # (op_name, model_args, outs, book_type, cc_type)
        events = [("login", (sym(user_name),), None, "none", "none")]

        if cfg.script is not None:
            rounds = [_parse_round(r) for r in cfg.script[k]]
        else:
            rounds = []
            wrongs = 0
            for _ in range(rng.randint(1, 3)):
                can = _achievable(world, user, session_net, sticky_fault)
                if rng.random() < 0.2 and wrongs < 3:
                    rounds.append((rng.choice(_ACTIONS), "wrong"))
                    wrongs += 1
                elif can:
                    rounds.append((rng.choice(can), rng.choice(("visa", "mc"))))
                else:
                    break

        for action, brand in rounds:
            svc, resp_op = _SERVICE[action]
            events.append(("choice", (sym("ss1"),), None, "none", "none"))
            events.append(("chooseService", (sym("ss1"), sym(svc)), None, action, "none"))
            events.append(("enterCard", (sym("ss1"),), (sym(brand),), action, brand))
            if brand == "wrong" and not skip_check:
                events.append(("redoCard", (sym("ss1"),), None, action, brand))
                continue
            events.append(("pickShop", (sym("ss1"),), None, action, brand))
            supplier = world.pick_supplier(user, action, sticky_fault)
            avail = world.available(user, action)
            pre_rooms = list(world.rooms)
            pre_cars = list(world.cars)
            ok, held_after = world.attempt(user, action, supplier, sticky_fault)
            if ok and action.startswith("book"):
                kind = "hotel" if action.endswith("hotel") else "car"
                session_net[kind] += 1
            elif ok:
                kind = "hotel" if action.endswith("hotel") else "car"
                session_net[kind] -= 1
            answer = "ok" if ok else "fail"
            events.append((resp_op, (sym("ss1"),), (sym(answer),), action, brand))
            block = {
                "UserID": user + 1,
                "BookType": _BOOK_TYPE[action],
                "requested": True,
                "CCType": _CC_TYPE[brand],
                "SupplierName": supplier + 1,
            }
            for i, n in enumerate(pre_rooms):
                block[f"RoomsAvailableHotel{i + 1}"] = n
            for i, n in enumerate(pre_cars):
                block[f"CarsAvailableShop{i + 1}"] = n
            block["available"] = avail
            if action.endswith("hotel"):
                block["RoomBooked"] = held_after
            else:
                block["CarBooked"] = held_after
            block["ShopAnswer"] = 1 if ok else 0
            block["allocated"] = ok
            blocks.append(block)

        events.append(("logout", (sym("ss1"),), None, "none", "none"))

        if early_point:
            # instrumentation artefact: the pickShop record is captured one
            # step early, before the enterCard it actually follows
            for i in range(1, len(events)):
                if events[i][0] == "pickShop" and events[i - 1][0] == "enterCard":
                    events[i - 1], events[i] = events[i], events[i - 1]

        steps = []
        for op_name, args, outs, book_type, cc_type in events:
            steps.append(OpEvent(op_name, args, outs))
            raw_args = tuple(
                sym(token) if a == sym("ss1") else a for a in args
            )
            seq += 1
            records.append(
                TraceRecord(
                    seq=seq,
                    trace_id="t1",
                    session_id=token,
                    user_id=user_name,
                    book_type=book_type,
                    cc_type=cc_type,
                    component="TravelAgent",
                    bop_name=OpEvent(op_name, raw_args, outs).render(),
                )
            )
        optraces[token] = OpTrace(tuple(steps), "TravelAgency", True)

    return records, optraces, StateTrace(tuple(blocks))


def render_records(records: list[TraceRecord]) -> str:
    """JSON-lines form of a record list (parse_records round-trips it)."""
    lines = []
    for r in records:
        obj = {"seq": r.seq, "bop_name": r.bop_name}
        for f in TraceRecord.SYMBOL_FIELDS:
            obj[f] = getattr(r, f)
        obj.update(dict(r.extras))
        lines.append(json.dumps(obj, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def inject_fault_report(cfg: SimConfig) -> str:
    """Describe which faults are active and where they perturb the flow."""
    if not cfg.faults:
        return "no faults\n"
    lines = []
    if "same_supplier_retry" in cfg.faults:
        lines.append(
            "same_supplier_retry: booking retries are pinned to the first "
            "supplier a user ever tried, so a request can fail while another "
            "supplier still has stock"
        )
    if "skip_card_check" in cfg.faults:
        lines.append(
            "skip_card_check: the enterCard validity guard is bypassed; a "
            "wrong card proceeds to pickShop and the service response "
            "(violates invariant clause c5)"
        )
    if "wrong_trace_point" in cfg.faults:
        lines.append(
            "wrong_trace_point: the pickShop trace record is emitted one "
            "step early, before its enterCard; replay fails although the "
            "simulated business state is correct"
        )
    return "\n".join(lines) + "\n"
