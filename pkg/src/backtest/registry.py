"""Named model variants with their training windows and feature recipes."""

import logging
from typing import Any, Dict, List, Mapping, Optional, Sequence

from src.boosting.gbm import PRICE_MODEL_TREES, SPECF1_TREES
from src.errors import PlanError
from src.models import FeatureRecipe, ModelClass, ModelFamily, ModelSpec
from src.series.windows import years_to_days
from src.univariate.arma_garch import AG_WINDOW_DAYS

logger = logging.getLogger(__name__)

# feature switches that travel in ModelSpec.params but are not estimator settings
FEATURE_KEYS = ("block_effect", "day_effect")

GBM_WINDOW_DAYS = 15
SARIMAX_WINDOW_DAYS = 15

UNI = ModelClass.UNIVARIATE
MULTI = ModelClass.MULTIVARIATE


def _ann(name: str, days: int, recipe: FeatureRecipe) -> ModelSpec:
    model_class = UNI if recipe == FeatureRecipe.NODS else MULTI
    return ModelSpec(
        name=name, family=ModelFamily.ANN, model_class=model_class, window_days=days,
        recipe=recipe, uses_ds_gap=recipe == FeatureRecipe.DS,
    )


def _svr(name: str, days: int, recipe: FeatureRecipe, kernel: str, ipp: bool = False) -> ModelSpec:
    model_class = UNI if recipe == FeatureRecipe.NODS else MULTI
    return ModelSpec(
        name=name, family=ModelFamily.SVR, model_class=model_class, window_days=days,
        recipe=recipe, uses_ds_gap=recipe == FeatureRecipe.DS, uses_ipp=ipp,
        params={"kernel": kernel},
    )


def _gbm(name: str, trees: int, block_effect: bool, ds_gap: bool, ipp: bool) -> ModelSpec:
    return ModelSpec(
        name=name, family=ModelFamily.GBM, model_class=MULTI, window_days=GBM_WINDOW_DAYS,
        recipe=FeatureRecipe.PCA, uses_ds_gap=ds_gap, uses_ipp=ipp,
        params={"n_trees": trees, "block_effect": block_effect, "day_effect": True},
    )


DEFAULT_REGISTRY: List[ModelSpec] = [
    ModelSpec(name="ARFIMA1", family=ModelFamily.ARFIMA, model_class=UNI, window_days=years_to_days(3.5)),
    ModelSpec(name="ARFIMA2", family=ModelFamily.ARFIMA, model_class=UNI, window_days=years_to_days(1.5)),
    ModelSpec(name="HW_1", family=ModelFamily.HOLT_WINTERS, model_class=UNI, window_days=years_to_days(1)),
    ModelSpec(name="ag", family=ModelFamily.ARMA_GARCH, model_class=UNI, window_days=AG_WINDOW_DAYS),
    _ann("pred_ANN_nods", 45, FeatureRecipe.NODS),
    _ann("pred_ANN_nods_15", 15, FeatureRecipe.NODS),
    _ann("pred_ANN_nods_30", 30, FeatureRecipe.NODS),
    _svr("pred_SVM_nods_15", 15, FeatureRecipe.NODS, "radial"),
    _svr("pred_SVMl_nods_15", 15, FeatureRecipe.NODS, "linear"),
    _ann("pred_ANN_ds", 45, FeatureRecipe.DS),
    _ann("pred_ANN_ds_15", 15, FeatureRecipe.DS),
    _ann("pred_ANN_ds_30", 30, FeatureRecipe.DS),
    _svr("pred_SVM_ds_7", 7, FeatureRecipe.DS, "radial"),
    _svr("pred_SVM_ds_15", 15, FeatureRecipe.DS, "radial"),
    ModelSpec(
        name="SARIMAX", family=ModelFamily.SARIMAX, model_class=MULTI,
        window_days=SARIMAX_WINDOW_DAYS, uses_ds_gap=True,
    ),
    _gbm("Price Model", PRICE_MODEL_TREES, block_effect=False, ds_gap=False, ipp=False),
    _gbm("Specf1", SPECF1_TREES, block_effect=True, ds_gap=False, ipp=False),
    _gbm("Specf1d", SPECF1_TREES, block_effect=True, ds_gap=True, ipp=False),
    _gbm("Price Model_ipp", PRICE_MODEL_TREES, block_effect=False, ds_gap=False, ipp=True),
    _gbm("Specf1_ipp", SPECF1_TREES, block_effect=True, ds_gap=False, ipp=True),
    _gbm("specf1d_ipp", SPECF1_TREES, block_effect=True, ds_gap=True, ipp=True),
    _svr("svm_pca_15", 15, FeatureRecipe.PCA, "linear"),
    _svr("svm_pca_30", 30, FeatureRecipe.PCA, "linear"),
    _svr("svm_pca_15_ipp", 15, FeatureRecipe.PCA, "linear", ipp=True),
    _svr("svm_pca_30_ipp", 30, FeatureRecipe.PCA, "linear", ipp=True),
]


def needs_drivers(spec: ModelSpec) -> bool:
    return spec.uses_ds_gap or spec.recipe == FeatureRecipe.PCA


class ModelRegistry:
    """Lookup and per-plan customization of model variants."""

    def __init__(self, specs: Optional[Sequence[ModelSpec]] = None):
        specs = list(DEFAULT_REGISTRY if specs is None else specs)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ValueError("model names in a registry must be unique")
        self._specs: Dict[str, ModelSpec] = {s.name: s for s in specs}

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def __len__(self) -> int:
        return len(self._specs)

    @property
    def names(self) -> List[str]:
        return list(self._specs)

    def get(self, name: str) -> ModelSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise PlanError(f"unknown model '{name}'") from None

    def resolve(
        self,
        names: Optional[Sequence[str]] = None,
        window_overrides: Optional[Mapping[str, int]] = None,
        param_overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
    ) -> List[ModelSpec]:
        """Specs for `names` (all when None) with plan overrides applied.

        Raises:
            PlanError: for unknown or duplicated names, or overrides of models not selected
        """
        selected = self.names if names is None else list(names)
        if len(set(selected)) != len(selected):
            raise PlanError("model subset lists a model twice")
        if not selected:
            raise PlanError("model subset is empty")
        specs = [self.get(n) for n in selected]
        window_overrides = dict(window_overrides or {})
        param_overrides = dict(param_overrides or {})
        stray = (set(window_overrides) | set(param_overrides)) - set(selected)
        if stray:
            raise PlanError(f"overrides name models outside the subset: {', '.join(sorted(stray))}")

        out = []
        for spec in specs:
            update: Dict[str, Any] = {}
            if spec.name in window_overrides:
                update["window_days"] = window_overrides[spec.name]
            if spec.name in param_overrides:
                update["params"] = {**spec.params, **param_overrides[spec.name]}
            if update:
                logger.info("overriding %s: %s", spec.name, update)
                spec = ModelSpec.model_validate({**spec.model_dump(), **update})
            out.append(spec)
        return out


def default_registry() -> ModelRegistry:
    """Convenience function for the full named registry."""
    return ModelRegistry()
