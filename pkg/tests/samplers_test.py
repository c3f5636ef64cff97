import numpy as np

from cantor_normal.samplers import ChunkSampler


def test_chunks_cover_horizon_once():
    horizon = int(np.random.randint(100, 500))
    chunk_size = int(np.random.randint(7, 40))
    overlap = 3
    owned = []
    for rank in range(3):
        sampler = ChunkSampler(horizon, chunk_size, overlap, num_replicas=3, rank=rank)
        chunks = list(sampler)
        assert len(chunks) == len(sampler)
        for start, stop, read_to in chunks:
            assert start <= stop <= read_to <= horizon
            assert read_to - stop <= overlap
            owned.extend(range(start, stop + 1))
    assert sorted(owned) == list(range(1, horizon + 1))


def test_last_chunk():
    sampler = ChunkSampler(10, 4, 2)
    assert list(sampler) == [(1, 4, 6), (5, 8, 10), (9, 10, 10)]
    assert len(ChunkSampler(0, 4)) == 0
