import numpy as np


def pixel_positions(nx, ny, pitch, origin=(0.0, 0.0)):
    """
    Lateral (x, y) positions of every pixel in raster order: pixel index
    iy * nx + ix lies at origin + (ix, iy) * pitch.
    """
    iy, ix = np.divmod(np.arange(nx * ny), nx)
    return origin[0] + ix * pitch, origin[1] + iy * pitch


def pixel_of(index, nx):
    """(row, column) of a raster pixel index"""
    return divmod(index, nx)


def spawn_seeds(master_seed, n):
    # one independent stream per work item, reproducible for any split
    return np.random.SeedSequence(master_seed).spawn(n)
