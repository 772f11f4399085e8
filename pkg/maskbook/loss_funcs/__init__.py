from .codebook_loss import magnitude_ref_index, phase_ref_index, combook_ref_index, reference_indices, cross_entropy_loss
from .spectral_loss import reduce_norm, spectral_loss, complex_loss, expected_csa_loss, expected_combook_csa_loss, wa_loss
from .clustering_loss import dc_whitened_kmeans_loss, chimera_loss
from .pit_loss import permutation_min
