import random
from fractions import Fraction

import pytest

from minihouse.ivm import AggSpec, AggState, DeltaRow, apply_delta_agg, canon
from minihouse.errors import UnsupportedAggregate


def spec():
    return AggSpec(("g",), (("n", "count", ""), ("s", "sum", "x"), ("m", "avg", "x")))


def brute_force(rows):
    """Independent oracle: direct dict-based grouping with exact sums."""
    groups = {}
    for r in rows:
        groups.setdefault(r["g"], []).append(r)
    out = []
    for g, members in groups.items():
        xs = [m["x"] for m in members if m["x"] is not None]
        total = sum((Fraction(x) for x in xs), Fraction(0))
        out.append(
            {
                "g": g,
                "n": len(members),
                "s": (int(total) if total.denominator == 1 else float(total)) if xs else None,
                "m": float(total / len(xs)) if xs else None,
            }
        )
    return sorted(out, key=lambda r: repr(r["g"]))


def as_multiset(rows):
    out = {}
    for r in rows:
        out[canon(r)] = out.get(canon(r), 0) + 1
    return out


class TestExamples:
    def test_empty_delta_is_identity(self):
        st = AggState(spec())
        before = {k: (g.count, dict(g.sums)) for k, g in st.groups.items()}
        assert apply_delta_agg(st, []) == []
        assert {k: (g.count, dict(g.sums)) for k, g in st.groups.items()} == before

    def test_insert_then_delete_eliminates_group(self):
        st = AggState(spec())
        ins = [
            DeltaRow((1,), 1, "insert", {"g": "a", "x": 5}),
            DeltaRow((2,), 2, "insert", {"g": "a", "x": 7}),
        ]
        out = apply_delta_agg(st, ins)
        assert [d.kind for d in out] == ["insert"]
        assert brute_force([d.payload for d in ins]) == [out[0].payload]
        dels = [
            DeltaRow((1,), 3, "delete", {"g": "a", "x": 5}),
            DeltaRow((2,), 4, "delete", {"g": "a", "x": 7}),
        ]
        out = apply_delta_agg(st, dels)
        assert [d.kind for d in out] == ["delete"]
        assert st.groups == {}  # zero-count group removed

    def test_update_changes_sum_by_difference(self):
        st = AggState(spec())
        apply_delta_agg(st, [DeltaRow((1,), 1, "insert", {"g": "a", "x": 5})])
        out = apply_delta_agg(
            st,
            [
                DeltaRow((1,), 2, "delete", {"g": "a", "x": 5}),
                DeltaRow((1,), 3, "insert", {"g": "a", "x": 7}),
            ],
        )
        kinds = {d.kind: d.payload for d in out}
        assert kinds["delete"]["s"] == 5 and kinds["insert"]["s"] == 7
        # oracle agreement
        assert brute_force([{"g": "a", "x": 7}]) == [kinds["insert"]]


class TestRandomizedOracle:
    def test_incremental_equals_recompute(self):
        rnd = random.Random(99)
        for _ in range(200):
            st = AggState(spec())
            live = {}  # tuple_key -> payload
            seq = 0
            view = {}
            for _batch in range(rnd.randint(1, 4)):
                deltas = []
                for _ in range(rnd.randint(1, 12)):
                    seq += 1
                    if live and rnd.random() < 0.4:
                        tk = rnd.choice(list(live))
                        deltas.append(DeltaRow(tk, seq, "delete", live.pop(tk)))
                    else:
                        tk = (rnd.randint(0, 10**6),)
                        payload = {
                            "g": rnd.choice("abc"),
                            "x": rnd.choice([None, rnd.randint(0, 9), round(rnd.uniform(0, 9), 2)]),
                        }
                        if payload["x"] is not None and isinstance(payload["x"], float):
                            payload["x"] = float(payload["x"])
                        live[tk] = payload
                        deltas.append(DeltaRow(tk, seq, "insert", payload))
                for d in apply_delta_agg(st, deltas):
                    c = canon(d.payload)
                    view[c] = view.get(c, 0) + d.sign
                    if view[c] == 0:
                        del view[c]
                assert view == as_multiset(brute_force(list(live.values())))
                # group-elimination law
                assert all(g.count >= 1 for g in st.groups.values())


def test_min_max_rejected():
    with pytest.raises(UnsupportedAggregate):
        AggSpec(("g",), (("lo", "min", "x"),))
