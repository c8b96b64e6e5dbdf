"""Brute-force reference computations, deliberately naive and loop-based.

None of these reuse the package's codec, projection or inference code.
"""
import itertools
import math

import numpy as np


def config_index(states, cards):
    """Mixed radix, first parent most significant (written out by hand)."""
    k = 0
    for s, r in zip(states, cards):
        k = k * r + s
    return k


def joint_prob(net, x):
    p = 1.0
    for i, node in enumerate(net.nodes):
        pa = [x[q] for q in node.parents]
        k = config_index(pa, [net.nodes[q].states for q in node.parents])
        p *= node.cpt[k][x[i]]
    return p


def all_states(cards):
    return itertools.product(*[range(c) for c in cards])


def consistent(x, case):
    return all(c < 0 or c == v for v, c in zip(x, case))


def family_posterior(net, case, i):
    """P(child, parents | observed entries of case) by summing the full joint."""
    node = net.nodes[i]
    pcards = [net.nodes[q].states for q in node.parents]
    r = int(np.prod(pcards)) if pcards else 1
    table = np.zeros((r, node.states))
    for x in all_states(net.cards):
        if consistent(x, case):
            k = config_index([x[q] for q in node.parents], pcards)
            table[k, x[i]] += joint_prob(net, x)
    return table / table.sum()


def parent_posterior(net, case, i):
    """P(parents | evidence) computed directly (without the child)."""
    node = net.nodes[i]
    pcards = [net.nodes[q].states for q in node.parents]
    r = int(np.prod(pcards)) if pcards else 1
    table = np.zeros(r)
    for x in all_states(net.cards):
        if consistent(x, case):
            table[config_index([x[q] for q in node.parents], pcards)] += joint_prob(net, x)
    return table / table.sum()


def expected_counts(net, rows):
    out = []
    for i, node in enumerate(net.nodes):
        pcards = [net.nodes[q].states for q in node.parents]
        r = int(np.prod(pcards)) if pcards else 1
        t = np.zeros((r, node.states))
        for row in rows:
            t += family_posterior(net, row, i)
        out.append(t)
    return out


def entropy(net):
    h = 0.0
    for x in all_states(net.cards):
        p = joint_prob(net, x)
        if p > 0:
            h -= p * math.log(p)
    return h


def bmn_prob(mix, x):
    """prod over nodes of sum over submodels, reading each submodel's table
    at the case's values of that submodel's own parents."""
    p = 1.0
    for i, subs in enumerate(mix.submodels):
        acc = 0.0
        for sub in subs:
            states = [x[q] for q in sub.parents]
            cards = [mix.base.nodes[q].states for q in sub.parents]
            acc += sub.weight * sub.cpt[config_index(states, cards)][x[i]]
        p *= acc
    return p


def tabulate(values, child, parents, cards):
    pcards = [cards[q] for q in parents]
    r = int(np.prod(pcards)) if pcards else 1
    t = np.zeros((r, cards[child]))
    for row in values:
        t[config_index([row[q] for q in parents], pcards), row[child]] += 1
    return t
