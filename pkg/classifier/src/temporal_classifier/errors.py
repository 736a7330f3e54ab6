"""Classifier-side exceptions."""


class ClassifierError(Exception):
    pass


class BadBinIndex(ClassifierError):
    def __init__(self, value: int, n_bins: int):
        super().__init__(f"time bin {value} outside [0, {n_bins - 1}]")
        self.value = value


class DataSchemaError(ClassifierError):
    pass


class EmptyTestSet(ClassifierError):
    pass
