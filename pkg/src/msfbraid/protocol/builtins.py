"""Built-in move generators: same-defect exchange, two-defect exchange, fusion.

Every generator returns plain ``shrink``/``grow``/``cut`` statements so the
decomposition can be printed, edited and recompiled.
"""

from __future__ import annotations

from dataclasses import replace

from ..errors import ProtocolError
from .compiler import DefectState
from .language import DIRECTIONS, Cut, DefectPath, Grow, ProtocolProgram, Shrink, direction_of

DEFAULT_ARM_LENGTH = 4

_PERP = {"left": ("up", "down"), "right": ("up", "down"), "up": ("left", "right"), "down": ("left", "right")}


def _merge(units):
    """Collapse consecutive identical unit moves into counted statements.

    A unit is ``(kind, defect, direction)`` or, for a grow that must start
    from a specific end, ``(kind, defect, direction, origin)``.
    """
    out = []
    for u in units:
        kind, name, d = u[:3]
        origin = u[3] if len(u) > 3 else None
        cls = Shrink if kind == "shrink" else Grow
        last = out[-1] if out else None
        if origin is None and type(last) is cls and last.defect == name and last.direction == d:
            out[-1] = replace(last, count=last.count + 1)
        elif cls is Shrink:
            out.append(Shrink(name, d, 1))
        else:
            out.append(Grow(name, d, 1, origin))
    return out


def _step(site, d, n=1):
    dx, dy = DIRECTIONS[d]
    return (site[0] + n * dx, site[1] + n * dy)


def _free_run(geom, start, d, occupied, limit):
    """Number of consecutive free in-lattice sites from ``start`` along ``d``."""
    n, s = 0, start
    while n < limit:
        s = _step(s, d)
        if not geom.contains(*s) or s in occupied:
            break
        n += 1
    return n


def _choose_arm(geom, junction, axis_dir, occupied, direction, length):
    """Pick arm direction and length perpendicular to ``axis_dir`` at ``junction``.

    Default direction is the side with more free room; default length is
    ``DEFAULT_ARM_LENGTH`` capped so one free site separates the arm tip
    from the lattice edge or another defect.
    """
    sides = [direction] if direction is not None else list(_PERP[axis_dir])
    for d in sides:
        if d not in DIRECTIONS or d not in _PERP[axis_dir]:
            raise ProtocolError(f"arm direction {d!r} is not perpendicular to the defect")
    room = {d: _free_run(geom, junction, d, occupied, geom.Lx + geom.Ly) for d in sides}
    d = max(sides, key=lambda k: room[k])
    if length is None:
        length = min(DEFAULT_ARM_LENGTH, room[d] - 1)
    if length < 2:
        raise ProtocolError(
            f"vertical arm at {junction} too short ({length} sites); the arm needs at least 2"
        )
    if length > room[d]:
        raise ProtocolError(
            f"arm of {length} sites from {junction} going {d} would exit the lattice "
            "or hit another defect"
        )
    return d, int(length)


def _rev(d):
    x, y = DIRECTIONS[d]
    return direction_of((0, 0), (-x, -y))


def _verify(geom, defects, statements, expect_restored=True):
    st = DefectState(geom, defects)
    init = st.snapshot()
    for s in statements:
        st.apply(s)
        st.check_connected()
    if expect_restored and {k: set(v) for k, v in st.snapshot().items()} != {
        k: set(v) for k, v in init.items()
    }:
        raise ProtocolError("generated moves do not restore the defect layout")
    return st


def same_defect_moves(geom, defect: DefectPath, junction, arm_direction=None, arm_length=None, occupied=None):
    """Primitive moves exchanging the two end modes of one straight defect.

    Sequence: retract the head end to the junction, grow the arm, retract the
    tail end to the junction, regrow the head side from the junction, retract
    the arm, regrow the tail side.  The two ends thereby trade places while
    one arm always separates them.
    """
    sites = list(defect.sites)
    if not defect.is_straight or len(sites) < 2:
        raise ProtocolError(f"defect {defect.id!r} must be a straight segment of at least 2 sites")
    junction = tuple(junction)
    if junction not in sites[1:-1]:
        raise ProtocolError(
            f"junction {junction} is not an interior site of defect {defect.id!r} "
            f"spanning {sites[0]}..{sites[-1]}"
        )
    j = sites.index(junction)
    n = len(sites)
    fwd = direction_of(sites[0], sites[1])
    back = _rev(fwd)
    occ = set(occupied or ()) | set(sites)
    d_arm, h = _choose_arm(geom, junction, fwd, occ, arm_direction, arm_length)
    name = defect.id
    units = []
    units += [("shrink", name, back)] * j
    units += [("grow", name, d_arm, junction)] + [("grow", name, d_arm)] * (h - 1)
    units += [("shrink", name, fwd)] * (n - 1 - j)
    units += [("grow", name, back, junction)] + [("grow", name, back)] * (j - 1)
    units += [("shrink", name, d_arm)] * h
    units += [("grow", name, fwd, junction)] + [("grow", name, fwd)] * (n - 2 - j)
    return _merge(units)


def _straight_link(a: DefectPath, b: DefectPath, at, occupied):
    """Free straight path of sites between an end of ``a`` and an end of ``b`` through ``at``."""
    best = None
    for ea in (a.sites[0], a.sites[-1]):
        for eb in (b.sites[0], b.sites[-1]):
            if ea[0] != eb[0] and ea[1] != eb[1]:
                continue
            d = direction_of((0, 0), ((eb[0] > ea[0]) - (eb[0] < ea[0]), (eb[1] > ea[1]) - (eb[1] < ea[1])))
            if d is None:
                continue
            length = abs(eb[0] - ea[0]) + abs(eb[1] - ea[1]) - 1
            path = [_step(ea, d, i) for i in range(1, length + 1)]
            if at not in path:
                continue
            if best is None or len(path) < len(best[2]):
                best = (ea, eb, path)
    if best is None:
        raise ProtocolError(
            f"no straight junction path through {at} joins an end of {a.id!r} to an end of {b.id!r}"
        )
    return best


def two_defect_moves(
    geom,
    d1: DefectPath,
    d2: DefectPath,
    at=None,
    junction_path=None,
    arm_direction=None,
    arm_length=None,
    occupied=None,
    tmp_name=None,
):
    """Primitive moves exchanging the facing ends of two defects.

    ``junction_path`` lists the free sites from the end of ``d1`` to the end
    of ``d2``; ``at`` (a site on it, default its middle) is the T-junction.
    Sequence: grow ``d1`` along the path up to the junction and on into the
    arm; grow ``d2`` along the path up to the site next to the junction
    (the two defects join there); cut ``d1`` one site before the junction so
    the arm now belongs to a third piece; retract ``d1`` home; retract the
    arm piece away; retract ``d2`` home.
    """
    occ = set(occupied or ())
    occ |= set(d1.sites) | set(d2.sites)
    if junction_path is None:
        if at is None:
            raise ProtocolError("two-defect exchange needs a junction site or path")
        e1, e2, path = _straight_link(d1, d2, tuple(at), occ)
    else:
        path = [tuple(s) for s in junction_path]
        if not path:
            raise ProtocolError("junction path is empty")
        e1 = next((e for e in (d1.sites[0], d1.sites[-1]) if direction_of(e, path[0])), None)
        e2 = next((e for e in (d2.sites[0], d2.sites[-1]) if direction_of(path[-1], e)), None)
        if e1 is None or e2 is None:
            raise ProtocolError("junction path must start next to an end of d1 and end next to an end of d2")
    if not path:
        raise ProtocolError("junction path is empty")
    for s in path:
        if not geom.contains(*s):
            raise ProtocolError(f"junction path site {s} is outside the lattice")
        if s in occ:
            raise ProtocolError(f"junction path collides with a defect at {s}")
    for a, b in zip(path, path[1:]):
        if direction_of(a, b) is None:
            raise ProtocolError(f"junction path has a non-adjacent step {a} -> {b}")
    if at is None:
        k = len(path) // 2
    elif tuple(at) in path:
        k = path.index(tuple(at))
    else:
        raise ProtocolError(f"junction {tuple(at)} is not on the junction path")
    if not 1 <= k <= len(path) - 2:
        raise ProtocolError(
            f"junction needs at least one path site on each side; path has {len(path)} sites"
        )
    C = path[k]
    axis = direction_of(path[k - 1], C)
    if direction_of(C, path[k + 1]) != axis:
        raise ProtocolError(f"junction path must be straight through the junction {C}")
    d_arm, h = _choose_arm(geom, C, axis, occ | set(path), arm_direction, arm_length)
    n1, n2 = d1.id, d2.id
    tmp = tmp_name or f"{n1}_{n2}_arm"

    units = []
    prev = e1
    for i, s in enumerate(path[: k + 1]):
        units.append(("grow", n1, direction_of(prev, s)) + ((e1,) if i == 0 else ()))
        prev = s
    units += [("grow", n1, d_arm, C)] + [("grow", n1, d_arm)] * (h - 1)
    prev = e2
    for i, s in enumerate(reversed(path[k + 1 :])):
        units.append(("grow", n2, direction_of(prev, s)) + ((e2,) if i == 0 else ()))
        prev = s
    stmts = _merge(units)
    stmts.append(Cut(n1, path[k - 1], tmp))
    # d1 now ends at path[k - 2] (or its original end); walk it back home
    back = []
    trail = [e1] + path[: k - 1]
    for i in range(len(trail) - 1, 0, -1):
        back.append(("shrink", n1, direction_of(trail[i - 1], trail[i])))
    back += [("shrink", tmp, d_arm)] * (h + 1)
    trail2 = [e2] + list(reversed(path[k + 1 :]))
    for i in range(len(trail2) - 1, 0, -1):
        back.append(("shrink", n2, direction_of(trail2[i - 1], trail2[i])))
    stmts += _merge(back)
    return stmts


def fuse_moves(defect: DefectPath, end="center"):
    """Shrink statements reducing ``defect`` to a single site.

    ``end`` names the direction the retracted end points (``left`` retracts
    the left end, leaving the rightmost site), or ``center`` to retract both
    ends alternately onto the middle site.
    """
    sites = list(defect.sites)
    n = len(sites)
    if n <= 1:
        return []
    if end == "center":
        units = []
        lo, hi = 0, n - 1
        while hi > lo:
            if (lo + (n - 1 - hi)) % 2 == 0:
                units.append(("shrink", defect.id, direction_of(sites[lo + 1], sites[lo])))
                lo += 1
            else:
                units.append(("shrink", defect.id, direction_of(sites[hi - 1], sites[hi])))
                hi -= 1
        return _merge(units)
    if end not in DIRECTIONS:
        raise ProtocolError(f"unknown fuse end {end!r}")
    if direction_of(sites[1], sites[0]) == end:
        order = range(n - 1)
        units = [("shrink", defect.id, direction_of(sites[i + 1], sites[i])) for i in order]
    elif direction_of(sites[-2], sites[-1]) == end:
        units = [("shrink", defect.id, direction_of(sites[i - 1], sites[i])) for i in range(n - 1, 0, -1)]
    else:
        raise ProtocolError(f"no end of defect {defect.id!r} points {end}")
    return _merge(units)


def fuse_site(defect: DefectPath, end="center"):
    """The site ``r0`` that :func:`fuse_moves` leaves behind."""
    sites = list(defect.sites)
    if end == "center":
        return sites[len(sites) // 2]
    if len(sites) > 1 and direction_of(sites[1], sites[0]) == end:
        return sites[-1]
    return sites[0]


# program-level generators ---------------------------------------------------


def _program(defects, statements, params=None):
    return ProtocolProgram(defects={d.id: d for d in defects}, params=dict(params or {}), statements=list(statements))


def builtin_exchange_same_defect(
    geom, defect: DefectPath, junction_column, arm_direction=None, arm_length=None, params=None
) -> ProtocolProgram:
    """Program exchanging the end modes of ``defect`` through a T-junction.

    Parameters
    ----------
    geom : LatticeGeometry
    defect : DefectPath
        Straight defect.
    junction_column : int
        Coordinate of the junction along the defect axis (``x`` for a
        horizontal defect, ``y`` for a vertical one).
    arm_direction : str, optional
        Side of the arm; default is the side with more room.
    arm_length : int, optional
        Arm length in sites (at least 2).
    """
    s0, s1 = defect.sites[0], defect.sites[-1]
    junction = (junction_column, s0[1]) if s0[1] == s1[1] else (s0[0], junction_column)
    stmts = same_defect_moves(geom, defect, junction, arm_direction, arm_length)
    _verify(geom, [defect], stmts)
    return _program([defect], stmts, params)


def builtin_exchange_two_defects(
    geom,
    d1: DefectPath,
    d2: DefectPath,
    junction_path,
    junction=None,
    arm_direction=None,
    arm_length=None,
    params=None,
) -> ProtocolProgram:
    """Program exchanging the facing ends of ``d1`` and ``d2``.

    ``junction_path`` is the list of free sites linking them; ``junction``
    (default: middle of the path) is where the exchange arm branches off.
    """
    path = [tuple(s) for s in junction_path]
    if not path:
        raise ProtocolError("junction path is empty")
    stmts = two_defect_moves(
        geom, d1, d2, at=junction if junction is not None else path[len(path) // 2],
        junction_path=path, arm_direction=arm_direction, arm_length=arm_length,
    )
    _verify(geom, [d1, d2], stmts)
    return _program([d1, d2], stmts, params)


def builtin_fuse_to_site(geom, defect: DefectPath, target_end="center", params=None) -> ProtocolProgram:
    """Program shrinking ``defect`` to one site; see :func:`fuse_moves`."""
    stmts = fuse_moves(defect, target_end)
    st = _verify(geom, [defect], stmts, expect_restored=False)
    left = st.snapshot().get(defect.id, ())
    if len(defect.sites) and len(left) != 1:
        raise ProtocolError("fusion did not end on a single site")
    return _program([defect], stmts, params)
