"""Hard finite-sum instances, a proximal incremental oracle and span-model experiments."""
from .errors import (NumericalError, ParameterDomainError, ProxValidityError, RegimeError,
                     UnsupportedFamilyError)
from .instances import (FAMILIES, Certificate, HardInstance, certificate, make_avg_c,
                        make_avg_sc, make_c, make_nc, make_one_d, make_sc, minimizer,
                        restricted_gap)
from .oracle import Oracle, OracleReply, full_gradient, full_value, pifo_call

__version__ = "0.1.0"
