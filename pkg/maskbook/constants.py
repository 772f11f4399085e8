import math

# STFT defaults: 32 ms window, 8 ms hop at 8 kHz, 256-point DFT (129 bins)
DEFAULT_SAMPLE_RATE = 8000
DEFAULT_WIN_LENGTH = 256
DEFAULT_HOP = 64
DEFAULT_DFT_SIZE = 256
DEFAULT_WINDOW = 'sqrt_hann'
WINDOW_KINDS = ('sqrt_hann', 'hann', 'hamming', 'rect')

# numerical guards
ZERO_MIXTURE_EPS = 1e-12
PHASE_DEGENERACY_EPS = 1e-12
GRAD_DEGENERACY_EPS = 1e-8
SIMPLEX_TOL = 1e-9
CE_LOG_FLOOR = 1e-30
ORACLE_LOGIT_FLOOR = 1e-9
DC_RIDGE = 1e-9
COLA_TOL = 1e-10

# oracle masks
MASK_KINDS = ('IBM', 'IRM', 'WF', 'IAM', 'PSF', 'TPSF', 'ICM')
REAL_MASK_KINDS = ('IBM', 'IRM', 'WF', 'IAM', 'PSF', 'TPSF')
R_MAX_MASK_KINDS = ('IAM', 'ICM')
DEFAULT_R_MAX = 2.
UNBOUNDED = math.inf

# codebook optimisation
DEFAULT_EM_EPOCHS = 40
DEFAULT_OPT_CORPUS_SIZE = 50
CODEBOOK_KINDS = ('magbook', 'phasebook', 'combook')

# losses
SPECTRAL_LOSS_KINDS = ('MA', 'MSA', 'PSA')
COMPLEX_LOSS_KINDS = ('CMA', 'CSA')
LOSS_NORMS = ('L1', 'L2')
DEFAULT_CHIMERA_ALPHA = 0.975
MAX_PIT_SOURCES = 4
REFERENCE_PHASE_POLICIES = ('zero', 'fixed-reference', 'current-estimate')

# trainable loss specs understood by the grad module
GRAD_LOSS_KINDS = ('MSA', 'PSA', 'CMA', 'CSA', 'eCSA', 'WA', 'WA-MISI')
FIT_INITS = ('oracle', 'random', 'uniform')

# metrics
SISDR_CAP_DB = 120.
SISDR_RESIDUAL_TOL = 1e-12

# synthetic corpus
SOURCE_TYPES = ('sinusoid-bank', 'chirp', 'filtered-noise', 'speech-like-am')

# spectrogram binary format
SPEC_MAGIC = b'MSKB'
SPEC_VERSION = 1
