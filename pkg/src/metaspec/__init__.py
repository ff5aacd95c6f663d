"""metaspec: meta-property specification, transformation and checking for
a mini-C language.

Pipeline: parse_program -> typecheck -> extract_metas/check_well_formed ->
normalize_program -> apply_all -> emit_annotated_source / run_with_checks,
with naive_oracle + diff_reports as the unpruned ground truth.
"""

from .ast import Program, SourceLoc
from .checker import (
    CheckReport, EquivalenceResult, Verdict, diff_reports, full_digest,
    load_stubs, naive_oracle, plain_run, run_with_checks,
)
from .errors import (
    DuplicateName, EvalError, IncomparableRuns, MetaspecError,
    MiniRuntimeError, ParseError, SpecError, TypecheckError, TypecheckFailure,
)
from .interp import ConcreteRegion, Interp, MemoryState, eval_predicate
from .normalize import (
    AccessDescriptor, AccessInfo, NormalizedProgram, classify_accesses,
    normalize_program,
)
from .parser import parse_program
from .pretty import pretty_print, render_meta, render_pred
from .spec_ast import ContextKind, MetaProperty, Predicate, TargetSpec
from .spec_parser import extract_metas, parse_meta_block
from .transform import (
    AnnotatedProgram, Footprint, TaggedPred, apply_all, apply_meta,
    emit_annotated_source, free_footprint, instantiate, lint_annotations,
    may_affect, parse_annotated_program,
)
from .typecheck import TypedProgram, typecheck
from .wellformed import check_well_formed, resolve_targets

__all__ = [name for name in dir() if not name.startswith("_")]
