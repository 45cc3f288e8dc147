"""dB <-> linear conversions. Every module goes through these two helpers."""

import numpy as np


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0) if np.ndim(db) else 10.0 ** (float(db) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x) if np.ndim(x) else 10.0 * float(np.log10(x))
