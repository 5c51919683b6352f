"""Independent brute-force oracles for the test suite.

These deliberately avoid the library's code paths: naive nested loops,
exhaustive search and numerical quadrature, mirroring only the
documented definitions. Slow on purpose; test fixtures stay small.
"""

from __future__ import annotations

import math

import numpy as np

from inferbench.porter import stem


def bf_ngrams(tokens, n):
    grams = []
    for i in range(len(tokens) - n + 1):
        grams.append(tuple(tokens[i : i + n]))
    return grams


def bf_bleu(hyps, refs, max_n=4):
    matched = [0.0] * max_n
    total = [0.0] * max_n
    c = sum(len(h) for h in hyps)
    r = sum(len(rf) for rf in refs)
    for hyp, ref in zip(hyps, refs):
        for n in range(1, max_n + 1):
            hyp_grams = bf_ngrams(hyp, n)
            ref_grams = bf_ngrams(ref, n)
            for gram in set(hyp_grams):
                h_count = sum(1 for g in hyp_grams if g == gram)
                r_count = sum(1 for g in ref_grams if g == gram)
                matched[n - 1] += min(h_count, r_count)
            total[n - 1] += len(hyp_grams)
    bp = 1.0 if c >= r or c == 0 else math.exp(1.0 - r / c)
    out = {}
    for n in range(1, max_n + 1):
        ps = []
        for j in range(n):
            ps.append(matched[j] / total[j] if total[j] > 0 else 0.0)
        if any(p == 0.0 for p in ps):
            out[n] = 0.0
        else:
            out[n] = bp * math.exp(sum(math.log(p) for p in ps) / n)
    return out


def bf_lcs(a, b):
    if not a or not b:
        return 0
    if a[-1] == b[-1]:
        return 1 + bf_lcs(a[:-1], b[:-1])
    return max(bf_lcs(a[:-1], b), bf_lcs(a, b[:-1]))


def bf_rouge_l(hyp, ref, beta=1.2):
    if not hyp or not ref:
        return 0.0
    lcs = bf_lcs(tuple(hyp), tuple(ref))
    if lcs == 0:
        return 0.0
    p = lcs / len(hyp)
    r = lcs / len(ref)
    return (1 + beta * beta) * p * r / (r + beta * beta * p)


def bf_meteor(hyp, ref, alpha=0.9, gamma=0.5, beta=3.0):
    """Exhaustive alignment search: every injective stem-compatible
    mapping, keeping (max matches, then min chunks)."""
    hs = [stem(t) for t in hyp]
    rs = [stem(t) for t in ref]
    best = [0, 0]  # matches, chunks

    def chunks_of(pairs):
        count = 0
        last = None
        for i, j in pairs:
            if last is None or i != last[0] + 1 or j != last[1] + 1:
                count += 1
            last = (i, j)
        return count

    def explore(i, used, pairs):
        if i == len(hs):
            m = len(pairs)
            ch = chunks_of(pairs)
            if m > best[0] or (m == best[0] and (best[0] == 0 or ch < best[1])):
                best[0], best[1] = m, ch
            return
        explore(i + 1, used, pairs)
        for j in range(len(rs)):
            if j not in used and rs[j] == hs[i]:
                explore(i + 1, used | {j}, pairs + [(i, j)])

    explore(0, frozenset(), [])
    m, ch = best
    if m == 0:
        return 0.0
    p = m / len(hyp)
    r = m / len(ref)
    f_mean = p * r / (alpha * p + (1 - alpha) * r)
    return f_mean * (1 - gamma * (ch / m) ** beta)


def bf_cider(hyps, refs):
    stemmed_refs = [[stem(t) for t in ref] for ref in refs]
    n_docs = len(stemmed_refs)
    per_pair = []
    for hyp, ref in zip(hyps, refs):
        hs = [stem(t) for t in hyp]
        rs = [stem(t) for t in ref]
        total = 0.0
        for n in range(1, 5):
            h_grams = bf_ngrams(hs, n)
            r_grams = bf_ngrams(rs, n)
            vocab = sorted(set(h_grams) | set(r_grams))
            hv, rv = [], []
            for gram in vocab:
                df = 0
                for doc in stemmed_refs:
                    if gram in bf_ngrams(doc, n):
                        df += 1
                idf = math.log(n_docs / max(df, 1))
                hv.append(sum(1 for g in h_grams if g == gram) * idf)
                rv.append(sum(1 for g in r_grams if g == gram) * idf)
            nh = math.sqrt(sum(x * x for x in hv))
            nr = math.sqrt(sum(x * x for x in rv))
            if nh > 0 and nr > 0:
                total += 10.0 * sum(a * b for a, b in zip(hv, rv)) / (nh * nr)
        per_pair.append(total / 4.0)
    return sum(per_pair) / len(per_pair), per_pair


def bf_fleiss_kappa(table):
    table = [list(map(float, row)) for row in table]
    n = sum(table[0])
    big_n = len(table)
    p_bar = 0.0
    for row in table:
        p_bar += (sum(c * c for c in row) - n) / (n * (n - 1))
    p_bar /= big_n
    p_e = 0.0
    for j in range(len(table[0])):
        pj = sum(row[j] for row in table) / (big_n * n)
        p_e += pj * pj
    return (p_bar - p_e) / (1 - p_e)


def _t_pdf(x, df):
    return math.exp(
        math.lgamma((df + 1) / 2.0)
        - math.lgamma(df / 2.0)
        - 0.5 * math.log(df * math.pi)
        - (df + 1) / 2.0 * math.log(1.0 + x * x / df)
    )


def _simpson(f, a, b, fa, fm, fb):
    m = (a + b) / 2.0
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, b, fa, fm, fb, whole, eps, depth):
    m = (a + b) / 2.0
    lm, rm = (a + m) / 2.0, (m + b) / 2.0
    flm, frm = f(lm), f(rm)
    left = _simpson(f, a, m, fa, flm, fm)
    right = _simpson(f, m, b, fm, frm, fb)
    if depth <= 0 or abs(left + right - whole) < 15 * eps:
        return left + right + (left + right - whole) / 15.0
    return _adaptive(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + _adaptive(
        f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1
    )


def bf_t_two_sided_p(t, df):
    """Two-sided p by adaptive-Simpson quadrature of the t density."""
    if t == 0.0:
        return 1.0
    a, b = -abs(t), abs(t)
    f = lambda x: _t_pdf(x, df)
    fa, fb = f(a), f(b)
    fm = f(0.0)
    whole = _simpson(f, a, b, fa, fm, fb)
    inner = _adaptive(f, a, b, fa, fm, fb, whole, 1e-13, 48)
    return 1.0 - inner


def bf_perplexity(backend, dataset, template_id="default"):
    from inferbench.corpus import prepare_input_text
    from inferbench.metrics import tokenize

    total_nll = 0.0
    total_tokens = 0
    for ex in dataset:
        input_ids = backend.vocab.encode(tokenize(prepare_input_text(ex, template_id)))
        answer_ids = backend.vocab.encode(tokenize(ex.answer)) + [backend.vocab.eos_id]
        for j, gold in enumerate(answer_ids):
            prefix = [backend.vocab.bos_id] + answer_ids[:j]
            if input_ids:
                c = sum(backend.E[t] for t in input_ids) / len(input_ids)
            else:
                c = np.zeros(backend.d)
            p = sum(backend.E[t] for t in prefix) / len(prefix)
            logits = backend.U @ (0.5 * (c + p)) + backend.b
            probs = np.exp(logits) / np.exp(logits).sum()
            total_nll -= math.log(probs[gold])
            total_tokens += 1
    return math.exp(total_nll / total_tokens)


def bf_replace_positions(scorer, example, threshold, template_id="default"):
    """Recompute both conditional scores per gold position directly from
    the parameters and select positions above the threshold."""
    from inferbench.corpus import prepare_input_text
    from inferbench.metrics import tokenize

    answer_ids = scorer.vocab.encode(tokenize(example.answer))
    context_ids = scorer.vocab.encode(tokenize(prepare_input_text(example, template_id)))
    deltas = []
    for j, gold in enumerate(answer_ids):
        rest = [t for i, t in enumerate(answer_ids) if i != j]
        scores = []
        for window in (context_ids + rest, rest):
            if window:
                mean = sum(scorer.E[t] for t in window) / len(window)
            else:
                mean = np.zeros(scorer.d)
            logits = scorer.U @ mean + scorer.b
            log_probs = logits - math.log(np.exp(logits).sum())
            scores.append(log_probs[gold])
        deltas.append(abs(scores[0] - scores[1]))
    selected = [j for j, d in enumerate(deltas) if d > threshold]
    if not selected:
        selected = [max(range(len(deltas)), key=lambda j: (deltas[j], -j))]
    return selected
