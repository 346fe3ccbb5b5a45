"""Numerical defaults for the stationary-measure and critical-threshold library."""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
	"""Numerical configuration from environment variables."""

	# Quadrature
	GL_ORDER = int(os.getenv('MVSDE_GL_ORDER', '20'))  # Gauss-Legendre nodes per panel
	QUAD_RTOL = float(os.getenv('MVSDE_QUAD_RTOL', '1e-12'))
	INITIAL_PANELS = int(os.getenv('MVSDE_INITIAL_PANELS', '32'))
	MAX_PANELS = int(os.getenv('MVSDE_MAX_PANELS', '4096'))
	PRIMITIVE_STEP = float(os.getenv('MVSDE_PRIMITIVE_STEP', '0.05'))  # max sub-interval for a(x) sums
	PRIMITIVE_ORDER = int(os.getenv('MVSDE_PRIMITIVE_ORDER', '12'))
	LOG_CUTOFF = float(os.getenv('MVSDE_LOG_CUTOFF', '690.8'))  # exp(-690.8) ~ 1e-300
	TAIL_RTOL = float(os.getenv('MVSDE_TAIL_RTOL', '1e-14'))  # discarded mass relative to Z
	SMALL_SIGMA = float(os.getenv('MVSDE_SMALL_SIGMA', '0.05'))
	SEARCH_RADIUS = float(os.getenv('MVSDE_SEARCH_RADIUS', '4.0'))
	PROFILE_POINTS = int(os.getenv('MVSDE_PROFILE_POINTS', '2049'))

	# Root finding
	ROOT_GRID_POINTS = int(os.getenv('MVSDE_ROOT_GRID_POINTS', '400'))
	ROOT_FTOL = float(os.getenv('MVSDE_ROOT_FTOL', '1e-10'))
	ROOT_DEDUP = float(os.getenv('MVSDE_ROOT_DEDUP', '1e-6'))  # fraction of the scan window
	SLOPE_ZERO_TOL = float(os.getenv('MVSDE_SLOPE_ZERO_TOL', '1e-9'))
	SERIES_N_MAX = int(os.getenv('MVSDE_SERIES_N_MAX', '12'))

	# Thresholds
	SIGMA_FLOOR = float(os.getenv('MVSDE_SIGMA_FLOOR', '0.05'))
	BRACKET_DOUBLINGS = int(os.getenv('MVSDE_BRACKET_DOUBLINGS', '60'))
	SIGMA_TOL = float(os.getenv('MVSDE_SIGMA_TOL', '1e-8'))
	THETA_TOL = float(os.getenv('MVSDE_THETA_TOL', '1e-6'))
	COUNT_TOL = float(os.getenv('MVSDE_COUNT_TOL', '1e-4'))  # root-count bisection width

	# Audits
	AUDIT_GRID_POINTS = int(os.getenv('MVSDE_AUDIT_GRID_POINTS', '4001'))
	AUDIT_RADIUS = float(os.getenv('MVSDE_AUDIT_RADIUS', '5.0'))
	SIMPLE_ZERO_TOL = float(os.getenv('MVSDE_SIMPLE_ZERO_TOL', '1e-8'))
	AUDIT_TOL = float(os.getenv('MVSDE_AUDIT_TOL', '1e-10'))

	# Multi-well construction
	BLEND_WIDTH = float(os.getenv('MVSDE_BLEND_WIDTH', '0.01'))
	CONSTRUCTION_MARGIN = float(os.getenv('MVSDE_CONSTRUCTION_MARGIN', '0.1'))
	CONSTRUCTION_MAX_DOUBLINGS = int(os.getenv('MVSDE_CONSTRUCTION_MAX_DOUBLINGS', '40'))

	# Particle oracle
	DIVERGENCE_BOUND = float(os.getenv('MVSDE_DIVERGENCE_BOUND', '1e6'))
	BATCHES = int(os.getenv('MVSDE_BATCHES', '20'))

	@classmethod
	def validate(cls):
		"""Validate numerical defaults."""
		positive = [
			'GL_ORDER', 'QUAD_RTOL',
			'INITIAL_PANELS', 'MAX_PANELS', 'PRIMITIVE_STEP', 'PRIMITIVE_ORDER',
			'LOG_CUTOFF', 'TAIL_RTOL', 'SMALL_SIGMA', 'SEARCH_RADIUS',
			'ROOT_FTOL', 'ROOT_DEDUP', 'SIGMA_FLOOR', 'SIGMA_TOL', 'THETA_TOL',
			'COUNT_TOL', 'AUDIT_RADIUS', 'SIMPLE_ZERO_TOL', 'BLEND_WIDTH',
			'CONSTRUCTION_MARGIN', 'DIVERGENCE_BOUND',
		]

		invalid = [key for key in positive if not getattr(cls, key) > 0]
		if cls.ROOT_GRID_POINTS < 400:
			invalid.append('ROOT_GRID_POINTS')
		if cls.BATCHES < 2:
			invalid.append('BATCHES')
		if cls.PROFILE_POINTS < 64 or cls.AUDIT_GRID_POINTS < 64:
			invalid.append('PROFILE_POINTS' if cls.PROFILE_POINTS < 64 else 'AUDIT_GRID_POINTS')

		if invalid:
			raise ValueError(f"Invalid numerical configuration: {', '.join(invalid)}")

		return True
