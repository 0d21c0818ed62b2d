"""Encode and decode random ordered tag streams, checking that every
non-overflow record survives unchanged, and time decoding of a large
stream. Fails on any mismatch or below 10^7 decoded records per second."""
import sys
from timeit import default_timer

import numpy as np

import qeflim

n_streams = 10000
n_large = 10**7
# every thousandth stream is a long one
n_long = 10**6
np.random.seed(0)

header = qeflim.StreamHeader(sync_rate=10e6, micro_resolution=256.0,
                             cantilever_freq=70e3, scan_dims=(16, 16))


def random_table(n):
    kind = np.random.choice([qeflim.TagKind.PHOTON, qeflim.TagKind.PIXEL_MARKER,
                             qeflim.TagKind.CANTILEVER_MARKER], size=n,
                            p=[0.9, 0.05, 0.05])
    channel = np.where(kind == qeflim.TagKind.PHOTON,
                       np.random.randint(0, 4, size=n), 0)
    # heavy-tailed gaps so that some cross the macro-time wrap
    gaps = np.floor(np.random.pareto(0.8, size=n) * 100).astype(np.int64)
    macro = np.cumsum(gaps)
    micro = np.random.randint(0, header.n_micro_channels, size=n)
    pixel = np.where(kind == qeflim.TagKind.PIXEL_MARKER,
                     np.random.randint(0, header.n_pixels, size=n), 0)
    return qeflim.TagTable(kind, channel, macro, micro, pixel)


failures = 0
for trial in range(n_streams):
    n = n_long if trial % 1000 == 0 else np.random.randint(0, 200)
    table = random_table(n)
    decoded = qeflim.decode_stream(qeflim.encode_stream(header, table))
    if not decoded.records == table:
        failures += 1
print("{} of {} random streams failed the round trip".format(failures, n_streams))

table = random_table(n_large)
data = qeflim.encode_stream(header, table)
start_time = default_timer()
qeflim.decode_stream(data)
elapsed = default_timer() - start_time
print("decoded {} records in {:.2f} s ({:.3g} records/s)".format(
    n_large, elapsed, n_large / elapsed))

if failures or n_large / elapsed < 1e7:
    sys.exit(1)
