"""Side-by-side kinetic solvers for the relativistic scalar-gravity
(Nordstrom-Vlasov) system and its Newtonian (Vlasov-Poisson) limit, with
the machinery to measure the O(1/c) convergence between them.
"""

from .errors import (AccuracyError, ConfigurationError, NumericalInstabilityError,
                     NvlimitError, RejectedInputError, SupportViolationError)
from .diagnostics import ErrorRecord, OrderFit, compute_df, compute_kc, fit_order
from .field_poisson import (FreeSpacePoisson, NewtonianField, deposit_density,
                            gsharp_from_fin, poisson_solve)
from .field_wave import (FieldState, SourceGrid, deposit_source, init_field,
                         kirchhoff_eval, psi_positivity_audit, wave_energy,
                         wave_step)
from .grids import Grid3, GridSpec, load_snapshot, save_snapshot
from .harness import (RunConfig, RunSummary, load_config, parse_config,
                      rescaling_test, run_csweep, run_nv, run_vp)
from .phase_space import (ParticleEnsemble, Profile, SupportStats, bump,
                          eval_profile, sample_ensemble, support_update)
from .pusher import (ConservationTracker, FieldHistory, ForceSample, WaveLevel,
                     eval_f_pointwise, interp_fields, push_nv, push_vp)
from .quadrature import QuadSpec, gauss_legendre, sphere_rule
from .representation import (KernelSet, ManufacturedF, eval_kernels,
                             lemma1_scan, lemma2_check,
                             representation_dtphi_oracle,
                             representation_dxphi_oracle,
                             retarded_phi_oracle, spherical_mean)

__version__ = "0.1.0"
