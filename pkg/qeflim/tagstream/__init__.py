from .codec import (TagKind, TagRecord, TagTable, TagStream, StreamHeader,
                    MAGIC, HEADER_SIZE, RECORD_SIZE, encode_stream,
                    decode_stream, iter_stream, write_stream, read_stream,
                    absolute_times_ns)
from .height import (CantileverPhaseModel, height_at, assign_height_bins,
                     bin_width, bin_centers, dwell_fraction)
