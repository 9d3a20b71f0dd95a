"""
Problem-family exceptions
"""


class FlowError(RuntimeError):
    pass


class InfeasibleError(FlowError):
    pass


class MpcError(RuntimeError):
    pass
