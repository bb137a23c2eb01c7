"""Exception hierarchy shared by all subpackages."""


class CanonsymError(Exception):
    pass


class IncompatibleJets(CanonsymError):
    """Arithmetic between jets with different nvars, base point, or order."""


class DivisionByVanishingJet(CanonsymError):
    """Divisor jet has a constant term below the division floor."""


class BranchPointAtBase(CanonsymError):
    """Elementary function not analytic at the jet's constant term."""


class OrderExhausted(CanonsymError):
    """A derivative was requested from a jet of insufficient order."""


class OutOfDomain(CanonsymError):
    """A field was evaluated outside its admissible region."""


class IntegrationFailure(CanonsymError):
    """ODE propagation failed (step collapse or singular locus)."""


class InconsistentAnchor(CanonsymError):
    """ODE-backed field anchored at data violating its defining relation."""


class IntegrabilityViolated(CanonsymError):
    """Mixed partials of the reconstructed zeroth-order coefficient disagree."""


class SingularLeadingCoefficient(CanonsymError):
    """Leading coefficient of the highest derivative vanishes on the span."""


class StepCollapse(IntegrationFailure):
    pass


class BasisDegenerate(CanonsymError):
    """Collocation basis is numerically linearly dependent."""


class NoCandidate(CanonsymError):
    """Nullspace search produced no candidate below tolerance."""


class RankDeficientFit(CanonsymError):
    """Least-squares template is degenerate."""


class ConditionViolated(CanonsymError):
    """Potential does not satisfy the commutation precondition."""


class ResonantLambda(CanonsymError):
    """Eigenvalue choice makes the reduced first-order coefficient singular."""


class QuadratureFailure(CanonsymError):
    pass


class UnresolvedSpectrum(CanonsymError):
    """Eigenvalues failed to converge under grid refinement."""


class UnknownEquationId(CanonsymError):
    pass


class UnknownId(CanonsymError):
    pass
