import numpy as np


def assert_local_accuracy(result, tol=1e-6):
    total = result.base_value + result.values.sum(axis=1)
    np.testing.assert_allclose(total, result.margins, rtol=0, atol=tol)


def random_tree(rng, d, max_depth, p_split=0.8, scale=1.0):
    """Random regression tree with thresholds in (0, 1) and leaves in [-scale, scale]."""
    from churnkit.tree import TreeBuilder

    b = TreeBuilder()

    def grow(depth):
        if depth < max_depth and (depth == 0 or rng.random() < p_split):
            node = b.add_split(int(rng.integers(d)), float(rng.uniform(0.1, 0.9)), 1.0, 1.0, 1)
            li = grow(depth + 1)
            ri = grow(depth + 1)
            b.set_children(node, li, ri)
            return node
        return b.add_leaf(float(rng.uniform(-scale, scale)), 1.0, 1)

    grow(0)
    return b.build()


def shap_fixture(seed, d=None, n_trees=None):
    """Random (GbtModel, background, x) with d in {2,3,5}, 1-3 trees of depth <= 3
    and at most 8 background rows. Some instance cells copy a background cell so
    x and b agree on that feature."""
    from churnkit.gbt import GbtModel, GbtParams

    rng = np.random.default_rng(seed)
    d = int(rng.choice([2, 3, 5])) if d is None else d
    n_trees = int(rng.integers(1, 4)) if n_trees is None else n_trees
    trees = tuple(random_tree(rng, d, int(rng.integers(1, 4))) for _ in range(n_trees))
    model = GbtModel(trees, float(rng.normal()), GbtParams(), d)
    B = rng.uniform(0, 1, (int(rng.integers(1, 9)), d))
    x = rng.uniform(0, 1, d)
    copy = rng.random(d) < 0.2
    x[copy] = B[0, copy]
    return model, B, x
