"""Built-in incomplete-data models.

Each model ships with exact per-unit hooks (closed-form M-steps, conditional
likelihood-ratio moments) so the generic measure pipeline has an independent
brute-force or closed-form oracle to be checked against.
"""

from __future__ import annotations

from ..model_api import DataError, IncompleteModel
from .bernoulli import BernoulliMcarModel, BernoulliMcarUnit, bernoulli_statistics
from .entropy import EntropyReport, entropy_measure
from .haplotype import (
    HaplotypeCCUnit,
    HaplotypeEMResult,
    HaplotypePairTestModel,
    haplotype_em,
    simulate_two_snp_case_control,
)
from .normal import NormalMeanModel, NormalMeanUnit, normal_closed_forms
from .tilting import (
    TiltingFamilyUnit,
    TiltingModel,
    tilting_loglik,
    tilting_sibpair_ibs_unit,
    w_statistic,
)
from .two_sample import TwoSampleAlleleModel, TwoSampleCountsUnit, two_sample_lrt

_PLAIN_MODELS = {
    BernoulliMcarModel.tag: BernoulliMcarModel,
    NormalMeanModel.tag: NormalMeanModel,
    TwoSampleAlleleModel.tag: TwoSampleAlleleModel,
    TiltingModel.tag: TiltingModel,
}

MODEL_TAGS = tuple(sorted(_PLAIN_MODELS)) + (HaplotypePairTestModel.tag,)


def build_model(spec) -> IncompleteModel:
    """Instantiate a model from a tag string or a config object.

    A plain string selects a parameterless model.  The haplotype pairwise
    test needs the two haplotypes under comparison, so it takes an object:
    ``{"tag": "haplotype_cc", "num_haplotype": [1, 1], "ref_haplotype": [2, 2]}``.
    """
    if isinstance(spec, str):
        if spec in _PLAIN_MODELS:
            return _PLAIN_MODELS[spec]()
        if spec == HaplotypePairTestModel.tag:
            raise DataError("haplotype_cc needs num_haplotype and ref_haplotype; "
                            "pass a model object instead of a bare tag")
        raise DataError(f"unknown model tag {spec!r}; known: {', '.join(MODEL_TAGS)}")
    if isinstance(spec, dict):
        tag = spec.get("tag")
        if tag in _PLAIN_MODELS:
            return _PLAIN_MODELS[tag]()
        if tag == HaplotypePairTestModel.tag:
            try:
                num = tuple(spec["num_haplotype"])
                ref = tuple(spec["ref_haplotype"])
            except KeyError as exc:
                raise DataError(f"haplotype_cc model object is missing {exc}") from exc
            return HaplotypePairTestModel(num, ref)
        raise DataError(f"unknown model tag {tag!r}; known: {', '.join(MODEL_TAGS)}")
    raise DataError("model spec must be a tag string or an object with a 'tag' field")


__all__ = [
    "BernoulliMcarModel", "BernoulliMcarUnit", "bernoulli_statistics",
    "NormalMeanModel", "NormalMeanUnit", "normal_closed_forms",
    "TwoSampleAlleleModel", "TwoSampleCountsUnit", "two_sample_lrt",
    "TiltingModel", "TiltingFamilyUnit", "tilting_loglik", "w_statistic",
    "tilting_sibpair_ibs_unit",
    "HaplotypePairTestModel", "HaplotypeCCUnit", "HaplotypeEMResult",
    "haplotype_em", "simulate_two_snp_case_control",
    "EntropyReport", "entropy_measure",
    "build_model", "MODEL_TAGS",
]
