"""Wave propagation in inhomogeneous strings and Dirac systems via canonical systems."""

from .canonical import (Hamiltonian, WeylResult, cell_propagator, eikonal, eikonal_inverse,
                        integrate_transfer, szego_sum, weyl_m)
from .dirac import (DiracPotential, PiecewiseConstant, WvN, boundary_distance, dirac_special_criterion,
                    dirac_szego_sum, dispersion_criterion, korey_check, transfer_N0, window_terms,
                    wvn_numeric_check, wvn_region)
from .evolution import (CFLError, LatticeString, TravelingWave, cesaro_localization, discretize, energy,
                        evolve_spectral, free_dirac_evolution, initial_state, simulate, step_leapfrog,
                        traveling_wave_profile)
from .measures import DomainError, PowerTail, SpectralMeasure, ValidationError, szego_function
from .report import SzegoReport, Verdict
from .strings import (MassDistribution, boundary_density, hamiltonian_to_string, spectral_density_estimate,
                      string_eikonal, string_szego_criterion, string_to_hamiltonian, string_transfer,
                      two_material_string, wavefront)

__version__ = "0.1.0"
