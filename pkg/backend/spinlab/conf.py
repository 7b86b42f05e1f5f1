from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

_DEFAULTS = {
    "SPINLAB_DENSE_CUTOFF": 4096,
    "SPINLAB_DEGENERACY_TOL": 1e-8,
    "SPINLAB_HERMITIAN_TOL": 1e-12,
    "SPINLAB_ZERO_TOL": 1e-15,
    "SPINLAB_LANCZOS_MAXITER": 2000,
    "SPINLAB_LANCZOS_TOL": 1e-10,
    "SPINLAB_SCAN_CUTOFF": 2**22,
    "SPINLAB_SECTOR_CUTOFF": 2**20,
    "SPINLAB_THREADS": 1,
}


def setting(name: str):
    """Numerical default from Django settings, falling back to the built-in value.

    Services are also imported outside a configured Django process (notebooks,
    plain scripts), so missing settings are not an error here.
    """
    try:
        return getattr(settings, name, _DEFAULTS[name])
    except ImproperlyConfigured:
        return _DEFAULTS[name]
