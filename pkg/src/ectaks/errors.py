"""Exception hierarchy shared by every layer of the toolkit.

Each class carries an ``exit_code`` used by the command-line front end:
2 for validation problems, 3 for protocol rejects, 4 for infeasible or
conflicting requests.
"""


class EctaksError(Exception):
    exit_code = 2


# -- validation -------------------------------------------------------------

class ParameterMismatch(EctaksError):
    pass


class ZeroInverse(EctaksError):
    pass


class InvalidPoint(EctaksError):
    pass


class InvalidParameter(EctaksError):
    pass


class NotInSubgroup(EctaksError):
    pass


class OracleRefused(EctaksError):
    pass


class DegenerateConstraint(EctaksError):
    pass


class AsymmetricArrow(EctaksError):
    def __init__(self, i, j):
        super().__init__(f"arrow ({i},{j}) has no reverse arrow ({j},{i})")
        self.arrow = (i, j)


class SelfLoop(EctaksError):
    def __init__(self, i):
        super().__init__(f"self-loop at node {i}")
        self.node = i


class IdOutOfRange(EctaksError):
    pass


class RootsMismatch(EctaksError):
    pass


class UnknownNode(EctaksError):
    pass


class UnknownPeer(EctaksError):
    pass


class IdCollision(EctaksError):
    pass


class AlreadyProvisioned(EctaksError):
    pass


class PrerequisiteMissing(EctaksError):
    pass


class MalformedMessage(EctaksError):
    pass


class InvalidShare(EctaksError):
    pass


# -- protocol rejects -------------------------------------------------------

class BadTag(EctaksError):
    exit_code = 3


# -- infeasible / conflict --------------------------------------------------

class InfeasibleConstraint(EctaksError):
    exit_code = 4


class ZeroSessionKey(EctaksError):
    exit_code = 4


class ClusterConflict(EctaksError):
    exit_code = 4

    def __init__(self, member, msg=None):
        super().__init__(msg or f"member {member} is bound to a different cluster product")
        self.member = member


class ClusterNotFormed(EctaksError):
    exit_code = 4
