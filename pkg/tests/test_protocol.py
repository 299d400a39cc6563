import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msfbraid.errors import ConfigError, ProtocolError
from msfbraid.lattice import LatticeGeometry
from msfbraid.protocol import (
    DefectPath,
    builtin_exchange_same_defect,
    builtin_exchange_two_defects,
    builtin_fuse_to_site,
    compile_program,
    parse,
)
from msfbraid.protocol.compiler import DEFAULT_DT, default_substeps, schedule_events_from_csv
from msfbraid.protocol.language import (
    Cut,
    Exchange,
    Fuse,
    Grow,
    ProtocolProgram,
    Shrink,
    format_program,
)

LINE_GEOM = LatticeGeometry(18, 10)
TWO_DEFECT_GEOM = LatticeGeometry(12, 28)


def is_tree_forest(sites):
    """Every connected component of the site set is acyclic (paths, L and T shapes)."""
    sites = set(sites)
    nbr = {s: [t for t in sites if abs(s[0] - t[0]) + abs(s[1] - t[1]) == 1] for s in sites}
    seen = set()
    for s in sites:
        if s in seen:
            continue
        comp, stack = set(), [s]
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(nbr[u])
        seen |= comp
        edges = sum(len(nbr[u]) for u in comp) // 2
        if edges != len(comp) - 1:
            return False
    return True


def check_schedule(sch):
    t = 0.0
    for ev in sch.events:
        assert ev.t_start == pytest.approx(t) and ev.t_end > ev.t_start
        assert {ev.mu_from, ev.mu_to} == {sch.mu0, sch.mud}
        t = ev.t_end
    assert t == pytest.approx(sch.total_time)
    for s in sch.site_sets():
        assert is_tree_forest(s)


class TestParser:
    def test_basic_program(self):
        prog = parse("defect d1 = (2,4)..(15,4)\nshrink d1 right 1")
        assert len(prog.defects["d1"]) == 14
        assert prog.statements == [Shrink("d1", "right", 1)]

    def test_undeclared(self):
        with pytest.raises(ProtocolError, match="undeclared") as e:
            parse("shrink dX right 1")
        assert e.value.line == 1 and e.value.column == 8

    def test_syntax_error_position(self):
        with pytest.raises(ProtocolError) as e:
            parse("defect d = (1,1)..(4,1)\n\ngrow d sideways 2")
        assert e.value.line == 3 and e.value.column == 8

    def test_non_adjacent_path(self):
        with pytest.raises(ProtocolError, match="non-adjacent"):
            parse("defect d = (1,1)..(4,3)")

    def test_comments_and_params(self):
        prog = parse("# header\nparam tau_site = 50\ndefect d = (0,0)..(3,0)  # four sites\n")
        assert prog.params == {"tau_site": 50} and prog.statements == []

    def test_external_defects(self):
        d = DefectPath.segment("d1", (1, 1), (5, 1))
        prog = parse("shrink d1 left 2", defects={"d1": d})
        assert prog.defects["d1"] == d

    def test_all_statement_kinds(self):
        src = (
            "defect a = (1,1)..(6,1)\n"
            "defect b = (1,5)..(6,5)\n"
            "grow a up 2 from (6,1)\n"
            "cut a at (3,1) as c\n"
            "exchange a b at (6,3)\n"
            "exchange b at (3,5)\n"
            "fuse b center\n"
        )
        prog = parse(src)
        assert [type(s) for s in prog.statements] == [Grow, Cut, Exchange, Exchange, Fuse]
        assert parse(format_program(prog)) == prog


_ident = st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True).filter(
    lambda s: s not in {"defect", "param", "shrink", "grow", "cut", "exchange", "fuse", "at", "as", "from", "center"}
)
_dir = st.sampled_from(["left", "right", "up", "down"])
_site = st.tuples(st.integers(0, 30), st.integers(0, 30))


@st.composite
def programs(draw):
    names = draw(st.lists(_ident, min_size=1, max_size=3, unique=True))
    defects = {}
    for n in names:
        x, y = draw(_site)
        length = draw(st.integers(0, 6))
        end = (x + length, y) if draw(st.booleans()) else (x, y + length)
        defects[n] = DefectPath.segment(n, (x, y), end)
    params = {}
    if draw(st.booleans()):
        params["tau_site"] = draw(st.floats(0.1, 500, allow_nan=False))
    if draw(st.booleans()):
        params["substeps"] = draw(st.integers(1, 1000))
    stmts = []
    live = list(names)
    for _ in range(draw(st.integers(0, 6))):
        n = draw(st.sampled_from(live))
        kind = draw(st.integers(0, 4))
        if kind == 0:
            stmts.append(Shrink(n, draw(_dir), draw(st.integers(1, 9))))
        elif kind == 1:
            stmts.append(Grow(n, draw(_dir), draw(st.integers(1, 9)), draw(st.none() | _site)))
        elif kind == 2:
            new = draw(_ident.filter(lambda s: s not in live))
            stmts.append(Cut(n, draw(_site), new))
            live.append(new)
        elif kind == 3:
            pair = draw(st.lists(st.sampled_from(live), min_size=1, max_size=2, unique=True))
            stmts.append(Exchange(tuple(pair), draw(_site)))
        else:
            stmts.append(Fuse(n, draw(st.sampled_from(["left", "right", "up", "down", "center"]))))
    return ProtocolProgram(defects, params, stmts)


@settings(max_examples=150, deadline=None)
@given(programs())
def test_print_parse_round_trip(prog):
    assert parse(format_program(prog)) == prog


class TestCompiler:
    def test_shrink_one(self):
        prog = parse("defect d1 = (2,4)..(15,4)\nshrink d1 right 1\nparam tau_site = 7")
        sch = compile_program(prog, LINE_GEOM)
        assert len(sch.events) == 1
        ev = sch.events[0]
        assert ev.site == (15, 4) and ev.t_end - ev.t_start == 7
        assert (ev.mu_from, ev.mu_to) == (sch.mu0, sch.mud)[::-1]

    def test_empty_program(self):
        sch = compile_program(parse("defect d = (1,1)..(3,1)\n"), LINE_GEOM)
        assert sch.events == [] and sch.total_time == 0.0

    def test_out_of_lattice(self):
        with pytest.raises(ProtocolError, match="outside"):
            compile_program(parse("defect d = (4,1)..(4,3)\ngrow d down 2"), LINE_GEOM)

    def test_grow_onto_other_defect(self):
        src = "defect a = (2,2)..(5,2)\ndefect b = (2,4)..(5,4)\ngrow a up 2 from (5,2)"
        with pytest.raises(ProtocolError, match="occupied"):
            compile_program(parse(src), LINE_GEOM)

    def test_grow_onto_own_site(self):
        src = "defect a = (2,2)..(4,2)\ngrow a up 1 from (4,2)\ngrow a left 1 from (4,3)\ngrow a down 1 from (3,3)"
        with pytest.raises(ProtocolError, match="occupied"):
            compile_program(parse(src), LINE_GEOM)

    def test_tree_checker_rejects_loops(self):
        assert is_tree_forest({(0, 0), (1, 0), (1, 1)})
        assert not is_tree_forest({(0, 0), (1, 0), (1, 1), (0, 1)})

    def test_substep_default_from_dt(self):
        sch = compile_program(parse("defect d = (1,1)..(3,1)\nparam tau_site = 33"), LINE_GEOM)
        assert sch.substeps == default_substeps(33) == int(np.ceil(33 / DEFAULT_DT))

    def test_mu0_equal_mud_rejected(self):
        with pytest.raises(ConfigError):
            compile_program(parse("param mu0 = 1\nparam mud = 1\ndefect d = (1,1)..(3,1)\nshrink d left 1"), LINE_GEOM)
        assert compile_program(parse("param mu0 = 1\nparam mud = 1"), LINE_GEOM).events == []

    def test_csv_round_trip(self):
        prog = builtin_fuse_to_site(LINE_GEOM, DefectPath.segment("d1", (2, 5), (15, 5)))
        sch = compile_program(prog, LINE_GEOM)
        assert schedule_events_from_csv(sch.to_csv()) == sch.events


class TestBuiltins:
    d_line = DefectPath.segment("d1", (2, 5), (15, 5))

    def test_same_defect_on_line(self):
        prog = builtin_exchange_same_defect(LINE_GEOM, self.d_line, 8)
        sch = compile_program(prog, LINE_GEOM)
        check_schedule(sch)
        assert set(sch.final_sites) == set(sch.initial_sites)
        # the arm is used: some intermediate layout leaves the defect row
        assert any(any(y != 5 for _, y in s) for s in sch.site_sets())

    def test_same_defect_event_count(self):
        # arm of 4: left end 6 sites in, arm 4 out, right end 7 in, left arm 7 out... traced by hand
        prog = builtin_exchange_same_defect(LINE_GEOM, self.d_line, 8, "down", 4)
        sch = compile_program(prog, LINE_GEOM)
        # every site moved out must come back; counts are even and equal per direction
        grows = sum(ev.mu_to == sch.mud for ev in sch.events)
        assert grows == len(sch.events) - grows
        assert len(sch.events) == 34

    def test_twice_restores_geometry(self):
        prog = builtin_exchange_same_defect(LINE_GEOM, self.d_line, 8, "down", 4)
        twice = ProtocolProgram(prog.defects, prog.params, prog.statements * 2)
        sch = compile_program(twice, LINE_GEOM)
        check_schedule(sch)
        assert set(sch.final_sites) == set(sch.initial_sites)

    def test_short_defect_rejected(self):
        with pytest.raises(ProtocolError):
            builtin_exchange_same_defect(LINE_GEOM, DefectPath.segment("d", (4, 5), (5, 5)), 4)

    def test_junction_outside_span(self):
        with pytest.raises(ProtocolError):
            builtin_exchange_same_defect(LINE_GEOM, self.d_line, 16)

    def test_arm_exits_lattice(self):
        with pytest.raises(ProtocolError):
            builtin_exchange_same_defect(LINE_GEOM, self.d_line, 8, "down", 8)

    def test_two_defects_layout(self):
        d1 = DefectPath.segment("d1", (2, 9), (9, 9))
        d2 = DefectPath.segment("d2", (9, 18), (2, 18))
        path = [(9, y) for y in range(10, 18)]
        prog = builtin_exchange_two_defects(TWO_DEFECT_GEOM, d1, d2, path, junction=(9, 13), arm_direction="left", arm_length=5)
        sch = compile_program(prog, TWO_DEFECT_GEOM)
        check_schedule(sch)
        assert set(sch.final_sites) == set(sch.initial_sites)
        for name in ("d1", "d2"):
            assert set(sch.final_defects[name]) == set(sch.initial_defects[name])

    def test_two_defects_path_collision(self):
        d1 = DefectPath.segment("d1", (2, 9), (9, 9))
        d2 = DefectPath.segment("d2", (9, 18), (2, 18))
        with pytest.raises(ProtocolError):
            builtin_exchange_two_defects(TWO_DEFECT_GEOM, d1, d2, [(5, y) for y in range(8, 18)])

    def test_two_defects_empty_path(self):
        d1 = DefectPath.segment("d1", (2, 9), (9, 9))
        d2 = DefectPath.segment("d2", (9, 18), (2, 18))
        with pytest.raises(ProtocolError):
            builtin_exchange_two_defects(TWO_DEFECT_GEOM, d1, d2, [])

    def test_fuse_counts(self):
        sch = compile_program(builtin_fuse_to_site(LINE_GEOM, self.d_line, "right"), LINE_GEOM)
        assert len(sch.events) == 13
        assert sch.final_sites == [(2, 5)]
        check_schedule(sch)

    def test_fuse_single_site(self):
        d = DefectPath("d", ((3, 3),))
        sch = compile_program(builtin_fuse_to_site(LINE_GEOM, d), LINE_GEOM)
        assert sch.events == [] and sch.final_sites == [(3, 3)]

    def test_exchange_macro_matches_builtin(self):
        src = "defect d1 = (2,5)..(15,5)\nexchange d1 at (8,5)\n"
        a = compile_program(parse(src), LINE_GEOM)
        b = compile_program(builtin_exchange_same_defect(LINE_GEOM, self.d_line, 8), LINE_GEOM)
        assert [e.site for e in a.events] == [e.site for e in b.events]
