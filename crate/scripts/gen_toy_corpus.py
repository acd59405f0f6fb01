#!/usr/bin/env python3
"""Generate the bundled toy corpus under data/toy-corpus/.

Each lemma is produced by a seeded random walk of rewrites over its theory's
axioms and earlier lemmas, using the same rewriting discipline as the kernel:
a rule rewrites the first (pre-order) subterm of the left side it matches.
The recorded walk becomes the ground-truth proof, closed by `refl`.

Usage: python3 scripts/gen_toy_corpus.py [out_dir]
"""
import os
import random
import re
import sys

SEED = 20240601

# project -> list of (theory name, axioms [(kind, id, lhs, rhs)], leaf terms)
THEORIES = {
    "arith": [
        ("nat_add", [
            ("axiom", "add_0", "add(x, 0)", "x"),
            ("axiom", "add_s", "add(x, s(y))", "s(add(x, y))"),
            ("def", "one_def", "One", "s(0)"),
            ("def", "two_def", "Two", "s(s(0))"),
        ], ["a", "b", "0", "s(0)", "One", "Two"]),
        ("nat_mul", [
            ("axiom", "add_0", "add(x, 0)", "x"),
            ("axiom", "add_s", "add(x, s(y))", "s(add(x, y))"),
            ("axiom", "mul_0", "mul(x, 0)", "0"),
            ("axiom", "mul_s", "mul(x, s(y))", "add(mul(x, y), x)"),
        ], ["a", "b", "0", "s(0)", "s(s(0))"]),
        ("nat_pow", [
            ("axiom", "add_0", "add(x, 0)", "x"),
            ("axiom", "mul_0", "mul(x, 0)", "0"),
            ("axiom", "mul_s", "mul(x, s(y))", "add(mul(x, y), x)"),
            ("axiom", "pow_0", "pow(x, 0)", "s(0)"),
            ("axiom", "pow_s", "pow(x, s(y))", "mul(pow(x, y), x)"),
        ], ["a", "0", "s(0)", "s(s(0))"]),
    ],
    "lists": [
        ("list_append", [
            ("axiom", "app_nil", "app(Nil, ys)", "ys"),
            ("axiom", "app_cons", "app(cons(x, xs), ys)", "cons(x, app(xs, ys))"),
        ], ["xs", "ys", "Nil", "cons(a, Nil)", "cons(b, xs)"]),
        ("list_rev", [
            ("axiom", "app_nil", "app(Nil, ys)", "ys"),
            ("axiom", "app_cons", "app(cons(x, xs), ys)", "cons(x, app(xs, ys))"),
            ("axiom", "rev_nil", "rev(Nil)", "Nil"),
            ("axiom", "rev_cons", "rev(cons(x, xs))", "app(rev(xs), cons(x, Nil))"),
        ], ["xs", "Nil", "cons(a, Nil)", "cons(b, Nil)"]),
        ("list_len", [
            ("axiom", "len_nil", "len(Nil)", "0"),
            ("axiom", "len_cons", "len(cons(x, xs))", "s(len(xs))"),
            ("axiom", "app_nil", "app(Nil, ys)", "ys"),
            ("axiom", "app_cons", "app(cons(x, xs), ys)", "cons(x, app(xs, ys))"),
            ("axiom", "dbl_nil", "dbl(Nil)", "Nil"),
            ("axiom", "dbl_cons", "dbl(cons(x, xs))", "cons(x, cons(x, dbl(xs)))"),
        ], ["xs", "ys", "Nil", "cons(a, Nil)"]),
    ],
    "algebra": [
        ("monoid", [
            ("axiom", "unit_l", "op(E, x)", "x"),
            ("axiom", "unit_r", "op(x, E)", "x"),
            ("axiom", "assoc", "op(op(x, y), z)", "op(x, op(y, z))"),
        ], ["a", "b", "c", "E"]),
        ("group", [
            ("axiom", "unit_l", "op(E, x)", "x"),
            ("axiom", "unit_r", "op(x, E)", "x"),
            ("axiom", "assoc", "op(op(x, y), z)", "op(x, op(y, z))"),
            ("axiom", "inv_l", "op(inv(x), x)", "E"),
            ("axiom", "inv_r", "op(x, inv(x))", "E"),
            ("axiom", "inv_e", "inv(E)", "E"),
        ], ["a", "b", "E", "inv(a)"]),
        ("boolean", [
            ("axiom", "and_t", "and(T, x)", "x"),
            ("axiom", "and_f", "and(F, x)", "F"),
            ("axiom", "or_t", "or(T, x)", "T"),
            ("axiom", "or_f", "or(F, x)", "x"),
            ("axiom", "not_t", "not(T)", "F"),
            ("axiom", "not_f", "not(F)", "T"),
            ("axiom", "not_not", "not(not(x))", "x"),
        ], ["p", "q", "T", "F"]),
    ],
    "combinators": [
        ("ski", [
            ("axiom", "k_red", "ap(ap(K, x), y)", "x"),
            ("axiom", "s_red", "ap(ap(ap(S, x), y), z)", "ap(ap(x, z), ap(y, z))"),
            ("def", "i_def", "I", "ap(ap(S, K), K)"),
        ], ["u", "v", "K", "S", "I"]),
    ],
}

TOPICS = {
    "arith": ["Mathematics/Arithmetic"],
    "lists": ["Computer science/Data structures"],
    "algebra": ["Mathematics/Algebra", "Logic"],
    "combinators": ["Logic", "Computer science/Semantics"],
}

LEMMAS_PER_FILE = 20
# (theory, lemmas id, source rule id) for the pseudo-theorems
PSEUDO = [("nat_add", "add_simps"), ("nat_mul", "mul_simps"),
          ("list_rev", "rev_simps"), ("group", "group_simps"),
          ("boolean", "not_simps")]


# ---- terms ----------------------------------------------------------------

TOKEN = re.compile(r"\s*([A-Za-z0-9_']+|\(|\)|,)")


def tokenize(s):
    pos, out = 0, []
    s = s.strip()
    while pos < len(s):
        m = TOKEN.match(s, pos)
        if not m:
            raise ValueError(s)
        out.append(m.group(1))
        pos = m.end()
    return out


def parse(s):
    toks = tokenize(s)
    term, rest = parse_toks(toks)
    assert not rest, s
    return term


def is_var_name(name):
    return name[0].islower() or name[0] == "_"


def parse_toks(toks):
    name, toks = toks[0], toks[1:]
    if toks and toks[0] == "(":
        toks = toks[1:]
        args = []
        if toks[0] == ")":
            return ("app", name, ()), toks[1:]
        while True:
            a, toks = parse_toks(toks)
            args.append(a)
            if toks[0] == ",":
                toks = toks[1:]
                continue
            assert toks[0] == ")"
            return ("app", name, tuple(args)), toks[1:]
    if is_var_name(name):
        return ("var", name), toks
    return ("app", name, ()), toks


def show(t):
    if t[0] == "var":
        return t[1]
    _, name, args = t
    if not args:
        return name + "()" if is_var_name(name) else name
    return name + "(" + ", ".join(show(a) for a in args) + ")"


def size(t):
    return 1 if t[0] == "var" else 1 + sum(size(a) for a in t[2])


def variables(t, acc=None):
    acc = set() if acc is None else acc
    if t[0] == "var":
        acc.add(t[1])
    else:
        for a in t[2]:
            variables(a, acc)
    return acc


def match(pat, term, sub):
    """Goal variables are rigid: they only match pattern variables."""
    if pat[0] == "var":
        if pat[1] in sub:
            return sub if sub[pat[1]] == term else None
        sub = dict(sub)
        sub[pat[1]] = term
        return sub
    if term[0] == "var" or term[1] != pat[1] or len(term[2]) != len(pat[2]):
        return None
    for p, t in zip(pat[2], term[2]):
        sub = match(p, t, sub)
        if sub is None:
            return None
    return sub


def subst(t, sub):
    if t[0] == "var":
        return sub[t[1]]
    return ("app", t[1], tuple(subst(a, sub) for a in t[2]))


def rewrite_first(term, lhs, rhs):
    """Rewrite the first pre-order subterm matching lhs; None if none."""
    sub = match(lhs, term, {})
    if sub is not None:
        return subst(rhs, sub)
    if term[0] == "var":
        return None
    for i, a in enumerate(term[2]):
        r = rewrite_first(a, lhs, rhs)
        if r is not None:
            args = list(term[2])
            args[i] = r
            return ("app", term[1], tuple(args))
    return None


# ---- generation -----------------------------------------------------------

def random_term(rng, funcs, leaves, depth):
    if depth == 0 or rng.random() < 0.3:
        return parse(rng.choice(leaves))
    name, arity = rng.choice(funcs)
    return ("app", name, tuple(random_term(rng, funcs, leaves, depth - 1) for _ in range(arity)))


def signature(axioms):
    funcs = {}

    def walk(t):
        if t[0] == "app" and t[2]:
            funcs[t[1]] = len(t[2])
            for a in t[2]:
                walk(a)
    for _, _, l, r in axioms:
        walk(parse(l))
        walk(parse(r))
    return sorted(funcs.items())


def oriented(rules):
    """(step text, lhs, rhs) for every usable orientation."""
    out = []
    for rid, l, r in rules:
        out.append(("rw " + rid, l, r))
        if r[0] != "var" and variables(l) <= variables(r):
            out.append(("rw <- " + rid, r, l))
    return out


def gen_lemma(rng, funcs, leaves, rules, seen):
    for _ in range(400):
        start = random_term(rng, funcs, leaves, rng.choice([2, 3, 3, 4]))
        if size(start) < 3:
            continue
        steps, cur, visited = [], start, {start}
        target_len = rng.choice([1, 2, 2, 3, 3, 4, 5, 6])
        for _ in range(target_len):
            options = []
            for text, l, r in oriented(rules):
                nxt = rewrite_first(cur, l, r)
                if nxt is not None and nxt not in visited and size(nxt) <= 28:
                    # reverse steps must not grow the goal uncontrollably
                    if text.startswith("rw <-") and size(nxt) > size(cur) + 4:
                        continue
                    options.append((text, nxt))
            if not options:
                break
            forward = [o for o in options if not o[0].startswith("rw <-")]
            if forward and rng.random() < 0.75:
                options = forward
            text, cur = rng.choice(options)
            visited.add(cur)
            steps.append(text)
        if not steps or cur == start:
            continue
        key = (show(start), show(cur))
        if key in seen:
            continue
        seen.add(key)
        return start, cur, steps
    raise RuntimeError("could not generate lemma")


def build_theory(rng, project, name, axioms, leaves):
    funcs = signature(axioms)
    lines = [f"-- {name}: generated equational theory ({project})", f"theory {name}", ""]
    rules = []
    for kind, rid, l, r in axioms:
        lines.append(f"{kind} {rid}: {l} = {r}")
        lines.append("")
        rules.append((rid, parse(l), parse(r)))
    seen = set()
    pseudo = [p for t, p in PSEUDO if t == name]
    pseudo_at = rng.randrange(3, LEMMAS_PER_FILE - 2) if pseudo else -1
    for i in range(LEMMAS_PER_FILE):
        if i == pseudo_at:
            src = rng.choice(axioms)
            lines.append(f"lemmas {pseudo[0]}: {src[2]} = {src[3]}")
            lines.append("")
        if i % 7 == 3:
            lines.append(f"-- section {i // 7 + 1}")
            lines.append("")
        start, end, steps = gen_lemma(rng, funcs, leaves, rules, seen)
        kw = "theorem" if i % 9 == 8 else "lemma"
        lid = f"{name}_l{i:02d}"
        if name == "group" and i == LEMMAS_PER_FILE - 1:
            lid = "monoid_l00"  # same name as a lemma in another theory
        lines.append(f"{kw} {lid}: {show(start)} = {show(end)}")
        lines.append("proof:")
        for s in steps:
            lines.append("  " + s)
        lines.append("  refl")
        lines.append("")
        rules.append((lid, start, end))
    return "\n".join(lines)


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "data", "toy-corpus")
    rng = random.Random(SEED)
    manifest = ["# toy corpus: 10 theories in 4 projects"]
    for project, theories in THEORIES.items():
        os.makedirs(os.path.join(out, project), exist_ok=True)
        for name, axioms, leaves in theories:
            text = build_theory(rng, project, name, axioms, leaves)
            rel = f"{project}/{name}.thy"
            with open(os.path.join(out, rel), "w") as f:
                f.write(text)
            manifest.append(rel)
    with open(os.path.join(out, "corpus.manifest"), "w") as f:
        f.write("\n".join(manifest) + "\n")
    with open(os.path.join(out, "topics.txt"), "w") as f:
        f.write("# project: topic, topic\n")
        for project, topics in TOPICS.items():
            f.write(f"{project}: {', '.join(topics)}\n")


if __name__ == "__main__":
    main()
