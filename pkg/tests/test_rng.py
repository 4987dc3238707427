from vgswarm.utils.rng import batch_seeds, derive_seed, stream


def test_derive_seed_is_stable_per_tag():
    assert derive_seed(7, "camera/0") == derive_seed(7, "camera/0")
    assert derive_seed(7, "camera/0") != derive_seed(7, "camera/1")
    assert derive_seed(7, "camera/0") != derive_seed(8, "camera/0")


def test_streams_do_not_share_state():
    a = stream(3, "agent/0")
    b = stream(3, "agent/1")
    first = a.random(5)
    b.random(100)
    assert (stream(3, "agent/0").random(5) == first).all()


def test_batch_seeds():
    seeds = batch_seeds(0, 5)
    assert len(seeds) == 5
    assert len(set(seeds)) == 5
    assert seeds == batch_seeds(0, 5)
    assert batch_seeds(0, 3) == seeds[:3]
