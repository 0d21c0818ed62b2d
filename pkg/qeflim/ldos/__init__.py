from .models import (Medium, LayeredGeometry, EmitterModel, SpectrumModel,
                     QuadratureConfig, VACUUM, GLASS)
from .fresnel import fresnel
from .integrals import (ldos_parallel, ldos_perpendicular, ldos_oriented,
                        ldos_nv, mix_components, orientation_weights,
                        far_field_weight, interface_integral)
from .rates import (decay_rate, quantum_efficiency, qe_from_rates,
                    lifetime_ns, rate_per_us)
from .spectral import spectral_average, rho_components, approach_curve
