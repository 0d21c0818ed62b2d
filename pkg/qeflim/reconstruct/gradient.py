import numpy as np

from ..utils.data_structures import GradientMap


def _axis_derivative(rate, valid, axis, step):
    """
    Finite difference of `rate` along one axis: central where both
    neighbours are valid, one-sided where only one is, NaN otherwise.
    """
    n = rate.shape[axis]
    if n == 1:
        return np.zeros(rate.shape)

    def shifted(arr, offset, fill):
        out = np.full(arr.shape, fill, dtype=arr.dtype)
        src = [slice(None)] * arr.ndim
        dst = [slice(None)] * arr.ndim
        if offset > 0:
            src[axis], dst[axis] = slice(offset, None), slice(None, -offset)
        else:
            src[axis], dst[axis] = slice(None, offset), slice(-offset, None)
        out[tuple(dst)] = arr[tuple(src)]
        return out

    fwd_rate = shifted(rate, 1, np.nan)
    bwd_rate = shifted(rate, -1, np.nan)
    fwd_ok = shifted(valid, 1, False) & valid
    bwd_ok = shifted(valid, -1, False) & valid

    with np.errstate(invalid="ignore"):
        central = (fwd_rate - bwd_rate) / (2 * step)
        forward = (fwd_rate - rate) / step
        backward = (rate - bwd_rate) / step
    return np.select([fwd_ok & bwd_ok, fwd_ok, bwd_ok],
                     [central, forward, backward], default=np.nan)


def gradient_map(volume):
    """
    Gradient of the decay rate k = 1/tau (inverse microseconds per nm) at
    every valid voxel, using only valid neighbours. Axes with a single
    sample contribute a zero component.
    """
    valid = volume.valid
    rate = np.where(valid, volume.rate_per_us, np.nan)
    dz = volume.bin_width if volume.shape[2] > 1 else 1.0
    gx = _axis_derivative(rate, valid, 1, volume.pitch)
    gy = _axis_derivative(rate, valid, 0, volume.pitch)
    gz = _axis_derivative(rate, valid, 2, dz)
    grad = np.stack([gx, gy, gz], axis=-1)
    grad[~valid] = np.nan
    defined = valid & np.all(np.isfinite(grad), axis=-1)
    x, y, z = volume.positions()
    return GradientMap(grad, defined, x, y, z)


def inward_fraction(gradient, cylinder, *, reach, x_shift=0.0):
    """
    Share of the arrows within `reach` nm of the surface of `cylinder` (a
    wire along y lying on the substrate) whose x-z part points towards the
    wire axis. `x_shift` moves voxel x onto the emitter position. Voxels
    nearer to the substrate than to the wire are not counted. Returns
    (fraction, number of arrows counted).
    """
    dx = cylinder.x0 - (gradient.x + x_shift)
    dz = cylinder.radius - gradient.z
    distance = np.hypot(dx, dz) - cylinder.radius
    near = (gradient.defined & (distance > 0) & (distance <= reach)
            & (distance < gradient.z))
    with np.errstate(invalid="ignore"):
        inward = gradient.grad[..., 0] * dx + gradient.grad[..., 2] * dz > 0
    n_near = int(near.sum())
    if n_near == 0:
        return float("nan"), 0
    return float(inward[near].mean()), n_near
