"""Execution of directed procedures.

A procedure whose determinism is at most semidet runs on a simple
early-return path that produces zero or one answers.  Everything else runs
on the same interleaving stream algebra as the search engine, with exactly
one delay introduced per call, so that corpus programs produce answers in
the same order under both engines.

Generation is deferred: a ``GenerateVar`` normally binds its variable to a
fresh symbolic hole instead of enumerating, and top-level grounding expands
whatever holes remain in an answer.  That is only sound while no operation
ever inspects the symbolic value, so a static pass taints every generated
variable, follows the taint through assignments, matches and calls, and
forces inline enumeration for any generator whose output can reach a
guard, a match subject, or an in-argument.
"""

from __future__ import annotations

import itertools
from functools import partial

from .modes import (
    Assign,
    Det,
    DirCall,
    DirectedClause,
    DirectedProc,
    Direction,
    GenerateVar,
    Guard,
    GuardCtor,
    Match,
    Mode,
    ModeTable,
    ModedOp,
    _as_direction,
    direction_str,
)
from .normal import FlatVar
from .schema import Hole, InvalidValue, Node, Term, VarId, holes, is_ground
from .streams import Stream, bind, from_iterator, mplus_all, smap, stream_iter, unit


class ConvertError(Exception):
    """Directed execution was asked to do something impossible."""


class ResidualViolation(ConvertError):
    """A symbolic hole reached an operation that needs a concrete value."""


# --- residual planning ---

SourceId = tuple[str, str, int, int]


def _proc_key(proc: DirectedProc) -> tuple[str, str]:
    return proc.rel, direction_str(proc.direction)


def _clause_taint(
    proc: DirectedProc,
    ci: int,
    inline: set[SourceId],
    out_res: dict[tuple[str, str], tuple[frozenset, ...]],
) -> tuple[set[SourceId], dict[VarId, frozenset]]:
    clause = proc.clauses[ci]
    rel, dstr = _proc_key(proc)
    taint: dict[VarId, frozenset] = {}
    violations: set[SourceId] = set()

    def t(v: VarId) -> frozenset:
        return taint.get(v, frozenset())

    for oi, op in enumerate(clause.ops):
        if isinstance(op, Guard):
            violations |= t(op.var) | t(op.other)
        elif isinstance(op, GuardCtor):
            violations |= t(op.var)
            for a in op.args:
                violations |= t(a)
        elif isinstance(op, Match):
            violations |= t(op.var)
            for a in op.args:
                taint[a] = t(op.var)
        elif isinstance(op, Assign):
            if isinstance(op.term, FlatVar):
                taint[op.var] = t(op.term.var)
            else:
                acc = frozenset()
                for a in op.term.args:
                    acc |= t(a)
                taint[op.var] = acc
        elif isinstance(op, GenerateVar):
            source: SourceId = (rel, dstr, ci, oi)
            taint[op.var] = frozenset() if source in inline else frozenset({source})
        elif isinstance(op, DirCall):
            callee_key = (op.rel, direction_str(op.direction))
            callee_res = out_res.get(callee_key)
            for a, m in zip(op.args, op.direction):
                if m is Mode.IN:
                    violations |= t(a)
            for pos, (a, m) in enumerate(zip(op.args, op.direction)):
                if m is Mode.OUT:
                    taint[a] = callee_res[pos] if callee_res else frozenset()
    return violations, taint


def _out_residuals(
    table: ModeTable, inline: set[SourceId]
) -> dict[tuple[str, str], tuple[frozenset, ...]]:
    res = {
        (_proc_key(proc)): tuple(frozenset() for _ in proc.params)
        for proc in table.procs.values()
    }
    changed = True
    while changed:
        changed = False
        for proc in table.procs.values():
            key = _proc_key(proc)
            per_param = [set(s) for s in res[key]]
            for ci in range(len(proc.clauses)):
                _, taint = _clause_taint(proc, ci, inline, res)
                for i, (p, m) in enumerate(zip(proc.params, proc.direction)):
                    if m is Mode.OUT:
                        per_param[i] |= taint.get(p, frozenset())
            new = tuple(frozenset(s) for s in per_param)
            if new != res[key]:
                res[key] = new
                changed = True
    return res


def residual_plan(table: ModeTable) -> set[SourceId]:
    """Generators that must enumerate inline rather than stay symbolic."""
    inline: set[SourceId] = set()
    while True:
        out_res = _out_residuals(table, inline)
        violations: set[SourceId] = set()
        for proc in table.procs.values():
            for ci in range(len(proc.clauses)):
                v, _ = _clause_taint(proc, ci, inline, out_res)
                violations |= v
        fresh = violations - inline
        if not fresh:
            return inline
        inline |= fresh


# --- runtime ---


def _check_equal(a: Term, b: Term) -> bool:
    if a == b:
        return True
    if is_ground(a) and is_ground(b):
        return False
    raise ResidualViolation(
        f"cannot compare partially symbolic values {a} and {b}"
    )


class DirectedEngine:
    """Runs the procedures of one mode table."""

    def __init__(self, table: ModeTable) -> None:
        self.table = table
        self.schema = table.nprog.schema
        self.inline = residual_plan(table)
        self._out_res = _out_residuals(table, self.inline)
        self._holes = itertools.count(10_000_000)
        self._plans = {
            _proc_key(proc): [
                self._compile_clause(proc, ci, clause)
                for ci, clause in enumerate(proc.clauses)
            ]
            for proc in table.procs.values()
        }

    # --- entry points ---

    def run(
        self, rel: str, direction: Direction | str, ins, n: int | None = None
    ) -> list[tuple[Term, ...]]:
        """First n answers (all answers when n is None; diverges if infinite)."""
        answers = self.answer_iter(rel, direction, ins)
        if n is None:
            return list(answers)
        return list(itertools.islice(answers, n))

    def answer_iter(self, rel: str, direction: Direction | str, ins):
        return stream_iter(self.answers_stream(rel, direction, ins))

    def answers_stream(self, rel: str, direction: Direction | str, ins) -> Stream:
        direction = _as_direction(direction)
        raw = self.raw_stream(rel, direction, ins)
        if not any(self._out_res[rel, direction_str(direction)]):
            # No generation source can reach an out param, so answers are
            # already ground and grounding would map each one to itself.
            return raw
        return bind(raw, self._ground_stream)

    def _ground_stream(self, answer: tuple[Term, ...]) -> Stream:
        """Ground a raw answer, in ground_answers' exact enumeration order.

        Same hole order (first occurrence), same per-type generators, same
        nested bind-over-candidates shape.  Only the rebuilding differs: each
        tuple position is compiled once into a plug function, so hole-free
        subterms are shared between answers instead of re-walked per answer.
        """
        order: dict[VarId, None] = {}
        for term in answer:
            for v in holes(term):
                order.setdefault(v)
        residual = tuple(order)
        if not residual:
            return unit(answer)
        pluggers = tuple(_compile_plug(t) for t in answer)
        generate = self.schema.generate
        last = len(residual) - 1

        def at(i: int, assignment: dict) -> Stream:
            var = residual[i]
            candidates = from_iterator(generate(var.type))
            if i == last:

                def fill(value: Term) -> Stream:
                    asg = {**assignment, var: value}
                    return unit(tuple(p(asg) for p in pluggers))

            else:

                def fill(value: Term) -> Stream:
                    return at(i + 1, {**assignment, var: value})

            return bind(candidates, fill)

        return at(0, {})

    def raw_stream(self, rel: str, direction: Direction | str, ins) -> Stream:
        """Answer tuples before grounding; symbolic holes may remain."""
        direction = _as_direction(direction)
        proc = self.table.proc(rel, direction)
        env = self._entry_env(proc, ins)

        def emit(e: dict) -> Stream:
            return unit(tuple(e[p] for p in proc.params))

        if self.table.det(rel, direction) <= Det.SEMIDET:
            final = self._proc_maybe(proc, env)
            return None if final is None else emit(final)
        return lambda: bind(self._proc_stream(proc, env), emit)

    def maybe_answer(self, rel: str, direction: Direction | str, ins):
        """Early-return path, usable whenever the procedure is not nondet."""
        direction = _as_direction(direction)
        proc = self.table.proc(rel, direction)
        if self.table.det(rel, direction) > Det.SEMIDET:
            raise ConvertError(
                f"{rel}^{direction_str(direction)} is nondet, "
                "it has no single-answer form"
            )
        env = self._proc_maybe(proc, self._entry_env(proc, ins))
        if env is None:
            return None
        return tuple(env[p] for p in proc.params)

    def _entry_env(self, proc: DirectedProc, ins) -> dict[VarId, Term]:
        in_params = [
            p for p, m in zip(proc.params, proc.direction) if m is Mode.IN
        ]
        ins = tuple(ins)
        if len(ins) != len(in_params):
            raise ConvertError(
                f"{proc.rel}^{direction_str(proc.direction)} takes "
                f"{len(in_params)} inputs, got {len(ins)}"
            )
        env: dict[VarId, Term] = {}
        for p, value in zip(in_params, ins):
            if not is_ground(value):
                raise InvalidValue(f"input for {p!r} must be ground, got {value}")
            self.schema.check_value(value, p.type)
            env[p] = value
        return env

    def _fresh_hole(self, type_name: str) -> Hole:
        return Hole(VarId(next(self._holes), type_name, "r"))

    # --- single-answer path ---

    def _proc_maybe(self, proc: DirectedProc, env: dict) -> dict | None:
        for ci, clause in enumerate(proc.clauses):
            got = self._clause_maybe(proc, ci, clause, dict(env))
            if got is not None:
                return got
        return None

    def _clause_maybe(
        self, proc: DirectedProc, ci: int, clause: DirectedClause, env: dict
    ) -> dict | None:
        rel, dstr = _proc_key(proc)
        for oi, op in enumerate(clause.ops):
            if isinstance(op, Guard):
                if not _check_equal(env[op.var], env[op.other]):
                    return None
            elif isinstance(op, GuardCtor):
                val = self._concrete(env[op.var])
                if val.ctor != op.ctor:
                    return None
                for sub, a in zip(val.args, op.args):
                    if not _check_equal(sub, env[a]):
                        return None
            elif isinstance(op, Match):
                val = self._concrete(env[op.var])
                if val.ctor != op.ctor:
                    return None
                for sub, a in zip(val.args, op.args):
                    env[a] = sub
            elif isinstance(op, Assign):
                env[op.var] = self._build(op.term, env)
            elif isinstance(op, GenerateVar):
                if (rel, dstr, ci, oi) in self.inline:
                    env[op.var] = next(self.schema.generate(op.var.type))
                else:
                    env[op.var] = self._fresh_hole(op.var.type)
            elif isinstance(op, DirCall):
                callee = self.table.proc(op.rel, op.direction)
                sub_env = self._call_env(op, env)
                result = self._proc_maybe(callee, sub_env)
                if result is None:
                    return None
                for a, p, m in zip(op.args, callee.params, op.direction):
                    if m is Mode.OUT:
                        env[a] = result[p]
        return env

    # --- stream path ---
    #
    # Each clause is compiled once into a step plan.  Maximal runs of ops
    # that never suspend (guards, matches, assigns, residual generation) are
    # fused into a single function applied with smap; only calls and inline
    # generation become bind steps.  smap keeps the stream shape of the
    # per-op bind chain, so answer order is unchanged.

    def _proc_stream(self, proc: DirectedProc, env: dict) -> Stream:
        plans = self._plans[_proc_key(proc)]
        return mplus_all([self._run_plan(plan, env) for plan in plans])

    def _run_plan(self, plan: list, env: dict) -> Stream:
        if not plan:
            return unit(env)
        fused0, fn0 = plan[0]
        if fused0:
            got = fn0(env)
            out = None if got is None else unit(got)
        else:
            out = fn0(env)
        for fused, fn in plan[1:]:
            out = smap(out, fn) if fused else bind(out, fn)
        return out

    def _compile_clause(
        self, proc: DirectedProc, ci: int, clause: DirectedClause
    ) -> list:
        """Plan: list of (fused, fn); fused fns map env -> env | None.

        A mature run that follows a call or an enumeration is absorbed into
        that step's per-element function, so each element pays one dict copy
        and one map call instead of a separate stream layer.
        """
        plan: list = []
        run: list = []
        pending = None

        def flush(nxt) -> None:
            nonlocal run, pending
            if pending is not None:
                plan.append((False, pending(run)))
            elif run:
                plan.append((True, self._fuse(run)))
            run = []
            pending = nxt

        for oi, op in enumerate(clause.ops):
            if isinstance(op, DirCall):
                flush(partial(self._compile_call, op))
            elif isinstance(op, GenerateVar) and (
                (*_proc_key(proc), ci, oi) in self.inline
            ):
                flush(partial(self._compile_enumerate, op))
            else:
                run.append(self._compile_mature(op))
        flush(None)
        return plan

    @staticmethod
    def _fuse(steps: list):
        steps = list(steps)
        if len(steps) == 1:
            single = steps[0]
            return lambda env: single(dict(env))

        def fused(env: dict) -> dict | None:
            env = dict(env)
            for step in steps:
                env = step(env)
                if env is None:
                    return None
            return env

        return fused

    def _compile_mature(self, op: ModedOp):
        """One op as a function mutating its (owned) env, None on failure."""
        if isinstance(op, Guard):
            var, other = op.var, op.other

            def step(env: dict) -> dict | None:
                return env if _check_equal(env[var], env[other]) else None

            return step
        if isinstance(op, GuardCtor):
            var, ctor, args = op.var, op.ctor, op.args

            def step(env: dict) -> dict | None:
                val = self._concrete(env[var])
                if val.ctor != ctor:
                    return None
                for sub, a in zip(val.args, args):
                    if not _check_equal(sub, env[a]):
                        return None
                return env

            return step
        if isinstance(op, Match):
            var, ctor, args = op.var, op.ctor, op.args

            def step(env: dict) -> dict | None:
                val = self._concrete(env[var])
                if val.ctor != ctor:
                    return None
                for sub, a in zip(val.args, args):
                    env[a] = sub
                return env

            return step
        if isinstance(op, Assign):
            var = op.var
            if isinstance(op.term, FlatVar):
                src = op.term.var

                def step(env: dict) -> dict:
                    env[var] = env[src]
                    return env

                return step
            ctor, args = op.term.ctor, op.term.args
            # Arity-specialized: these run once per element on hot paths.
            if not args:
                const = Node(ctor, ())

                def step(env: dict) -> dict:
                    env[var] = const
                    return env

                return step
            if len(args) == 1:
                (a0,) = args

                def step(env: dict) -> dict:
                    env[var] = Node(ctor, (env[a0],))
                    return env

                return step
            if len(args) == 2:
                a0, a1 = args

                def step(env: dict) -> dict:
                    env[var] = Node(ctor, (env[a0], env[a1]))
                    return env

                return step

            def step(env: dict) -> dict:
                env[var] = Node(ctor, tuple([env[a] for a in args]))
                return env

            return step
        assert isinstance(op, GenerateVar)
        var, type_name = op.var, op.var.type

        def step(env: dict) -> dict:
            env[var] = self._fresh_hole(type_name)
            return env

        return step

    def _compile_call(self, op: DirCall, post: list):
        callee = self.table.proc(op.rel, op.direction)
        ins = tuple(
            (p, a)
            for a, p, m in zip(op.args, callee.params, op.direction)
            if m is Mode.IN
        )
        outs = tuple(
            (a, p)
            for a, p, m in zip(op.args, callee.params, op.direction)
            if m is Mode.OUT
        )
        post = tuple(post)
        proc_stream = self._proc_stream

        def step(env: dict) -> Stream:
            sub_env = {p: env[a] for p, a in ins}

            def emit(callee_env: dict) -> dict | None:
                env2 = dict(env)
                for a, p in outs:
                    env2[a] = callee_env[p]
                for s in post:
                    env2 = s(env2)
                    if env2 is None:
                        return None
                return env2

            # The single delay per call: same placement as the search engine.
            return lambda: smap(proc_stream(callee, sub_env), emit)

        return step

    def _compile_enumerate(self, op: GenerateVar, post: list):
        var, type_name = op.var, op.var.type
        post = tuple(post)
        generate = self.schema.generate

        def step(env: dict) -> Stream:
            def fill(value: Term) -> dict | None:
                env2 = dict(env)
                env2[var] = value
                for s in post:
                    env2 = s(env2)
                    if env2 is None:
                        return None
                return env2

            return smap(from_iterator(generate(type_name)), fill)

        return step

    # --- shared helpers ---

    def _call_env(self, op: DirCall, env: dict) -> dict[VarId, Term]:
        callee = self.table.proc(op.rel, op.direction)
        return {
            p: env[a]
            for a, p, m in zip(op.args, callee.params, op.direction)
            if m is Mode.IN
        }

    def _concrete(self, val: Term) -> Node:
        if isinstance(val, Hole):
            raise ResidualViolation(
                f"symbolic hole {val.var!r} reached a destructuring operation"
            )
        return val

    def _build(self, term, env: dict) -> Term:
        if isinstance(term, FlatVar):
            return env[term.var]
        return Node(term.ctor, tuple(env[a] for a in term.args))


def _compile_plug(term: Term):
    """term as a function of a hole assignment; hole-free parts are shared."""
    if isinstance(term, Hole):
        var = term.var
        return lambda asg: asg[var]
    if not holes(term):
        return lambda asg, term=term: term
    parts = tuple(_compile_plug(a) for a in term.args)
    ctor = term.ctor
    return lambda asg: Node(ctor, tuple(p(asg) for p in parts))


# --- textual emission ---


def transitive_procs(
    table: ModeTable, rel: str, direction: Direction | str
) -> list[DirectedProc]:
    """The requested procedure followed by everything it calls, in BFS order."""
    direction = _as_direction(direction)
    start = table.proc(rel, direction)
    seen = {_proc_key(start)}
    order = [start]
    queue = [start]
    while queue:
        proc = queue.pop(0)
        for clause in proc.clauses:
            for op in clause.ops:
                if isinstance(op, DirCall):
                    key = (op.rel, direction_str(op.direction))
                    if key not in seen:
                        seen.add(key)
                        callee = table.proc(op.rel, op.direction)
                        order.append(callee)
                        queue.append(callee)
    return order


def emit_proc(proc: DirectedProc, det: Det) -> str:
    from .modes import _proc_names

    names = _proc_names(proc)
    ins = [
        names[p] for p, m in zip(proc.params, proc.direction) if m is Mode.IN
    ]
    outs = [
        names[p] for p, m in zip(proc.params, proc.direction) if m is Mode.OUT
    ]
    rel, dstr = _proc_key(proc)
    combinator = "firstOf" if det <= Det.SEMIDET else "interleaveOf"
    lines = [
        f"proc {rel}_{dstr}({', '.join(ins)}) -> ({', '.join(outs)}):  # {det}",
        f"  {combinator}:",
    ]
    for clause in proc.clauses:
        lines.append("    allOf:")
        if not clause.ops:
            lines.append("      succeed")
        for op in clause.ops:
            lines.append(f"      {_emit_op(op, names)}")
    return "\n".join(lines)


def _emit_op(op: ModedOp, names: dict[VarId, str]) -> str:
    if isinstance(op, Guard):
        return f"guard {names[op.var]} == {names[op.other]}"
    if isinstance(op, GuardCtor):
        return f"guard {names[op.var]} == {_emit_ctor(op.ctor, op.args, names)}"
    if isinstance(op, Match):
        return f"match {_emit_ctor(op.ctor, op.args, names)} = {names[op.var]}"
    if isinstance(op, Assign):
        if isinstance(op.term, FlatVar):
            return f"{names[op.var]} := {names[op.term.var]}"
        return f"{names[op.var]} := {_emit_ctor(op.term.ctor, op.term.args, names)}"
    if isinstance(op, GenerateVar):
        return f"generate {names[op.var]} : {op.var.type}"
    ins = [
        names[a] for a, m in zip(op.args, op.direction) if m is Mode.IN
    ]
    outs = [
        names[a] for a, m in zip(op.args, op.direction) if m is Mode.OUT
    ]
    call = f"{op.rel}_{direction_str(op.direction)}({', '.join(ins)})"
    if outs:
        return f"({', '.join(outs)}) := {call}"
    return f"check {call}"


def _emit_ctor(ctor: str, args: tuple[VarId, ...], names: dict[VarId, str]) -> str:
    if not args:
        return ctor
    return f"{ctor}({', '.join(names[a] for a in args)})"


def emit_text(table: ModeTable, rel: str, direction: Direction | str) -> str:
    procs = transitive_procs(table, rel, direction)
    chunks = [
        emit_proc(p, table.det(p.rel, p.direction)) for p in procs
    ]
    return "\n\n".join(chunks) + "\n"
