"""
Nagios context for the ablation claims.

Maps the state code carried by each claim metric to a Nagios state and describes it
with the numbers behind the verdict.

State Mapping:
    - 0: Ok - The claim holds.
    - 1: Warning - A report-gated claim fails; write an investigation note.
    - 2: Critical - An ordering, margin or threshold claim fails.
    - 3: Unknown - The report is unreadable or has failed sub-runs.
"""

import nagiosplugin

state_mapping = {
    0: nagiosplugin.Ok,
    1: nagiosplugin.Warn,
    2: nagiosplugin.Critical,
    3: nagiosplugin.Unknown
}

state_messages = {
    0: "holds",
    1: "fails, investigation note required",
    2: "fails",
    3: "cannot be evaluated"
}


class AblationClaimContext(nagiosplugin.Context):
    """
    Custom Nagios plugin context for the ablation claims.

    Attributes:
        name (str): The name of the context, defaulting to 'ablation_claim'.
        details (dict[str, str]): Detail text per metric name.
        custom_description (str): Optional message overriding every description.
    """

    def __init__(self, name="ablation_claim", details=None, custom_description=None):
        super().__init__(name)
        self.details = details or {}
        self.custom_description = custom_description

    def evaluate(self, metric, resource):
        return self.result_cls(state_mapping.get(metric.value, nagiosplugin.Unknown), metric=metric)

    def describe(self, metric):
        if self.custom_description is not None:
            return self.custom_description
        message = f"{metric.name} {state_messages.get(metric.value, 'has no status')}"
        detail = self.details.get(metric.name)
        return f"{message}: {detail}" if detail else message

    def performance(self, metric, resource):
        return nagiosplugin.Performance(metric.name, metric.value)
