import numpy as np
import pytest

from synapsim.functions import affine, affine_clipped, constant
from synapsim.model import Bounds, ModelSpec, NSpecs, SystemState, validated


def simple_spec(lam=1.0, beta0=1.0, nu=0.0, B1=0.0, B2=1.0, gamma=1.0):
    """The linear-activation model whose weight is kicked by the trace."""
    return ModelSpec(
        lam=lam, ell=1, gamma=(gamma,), k0=(0.0,),
        k1=(constant(B1),), k2=(constant(B2),),
        beta=affine_clipped(nu, beta0), g=constant(0.0), n=NSpecs.zeros(),
        alpha=1.0, m_p=constant(0.0), m_d=constant(0.0), delta=0.0,
        bounds=Bounds(c_beta=(nu / beta0 if beta0 > 0 else 0.0),
                      C_beta=max(nu, beta0), c_g=0.0,
                      C_k=max(B1, B2), C_n=0.0, C_M=0.0),
        weight_update="jump", name="simple")


@pytest.fixture(scope="session")
def simple_model():
    return validated(simple_spec())


@pytest.fixture(scope="session")
def mild_simple_model():
    # gentle coefficients keep the dominating twin far from blow-up on [0, 1]
    return validated(simple_spec(beta0=0.4, B1=0.1, B2=0.2))


def dominating_drift_spec(lam=1.0, C_k=1.0, C_beta=1.0, gamma=1.0, C_n=0.5,
                          C_M=0.25, alpha=1.0):
    """Dominating-shaped model with drift weights, used as a drift exemplar."""
    n_all = affine(C_n, C_n)
    return ModelSpec(
        lam=lam, ell=1, gamma=(gamma,), k0=(C_k,),
        k1=(constant(C_k),), k2=(constant(C_k),),
        beta=affine_clipped(C_beta, C_beta), g=constant(0.0),
        n=NSpecs(n_all, n_all, n_all, n_all, n_all, n_all),
        alpha=alpha, m_p=affine(C_M, C_M), m_d=constant(0.0), delta=0.0,
        bounds=Bounds(c_beta=1.0, C_beta=C_beta, c_g=0.0, C_k=C_k, C_n=C_n,
                      C_M=C_M),
        weight_update="drift", name="dominating")


@pytest.fixture(scope="session")
def dominating_drift_model():
    return validated(dominating_drift_spec())


def zero_state(ell=1, w=1.0, x=0.0):
    return SystemState(x, np.zeros(ell), 0.0, 0.0, w)
