//! Compile a decision-tree model to P4-16-style source text: per-feature
//! register reads followed by nested if-else blocks, exactly one condition
//! per line, 4-space indentation.

use std::fmt::Write;

use thiserror::Error;

use crate::catalog::{FeatureId, FeatureMask};

use super::{ChildRef, DecisionTreeModel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("model uses feature {0}, which the feature mask does not enable")]
    FeatureNotEnabled(FeatureId),
}

/// Emit the model as P4-style text. Identical models yield byte-identical
/// output. Every feature the model reads must be enabled in `feature_mask`,
/// otherwise the generated reads would touch registers the pipeline does
/// not maintain.
pub fn compile_to_p4(
    model: &DecisionTreeModel,
    feature_mask: FeatureMask,
) -> Result<String, CompileError> {
    let used = model.feature_mask();
    for f in used.iter() {
        if !feature_mask.contains(f) {
            return Err(CompileError::FeatureNotEnabled(f));
        }
    }

    let mut out = String::new();
    // Local declarations, one per distinct feature, catalog order. The
    // trailing comment carries the 1-based catalog position.
    for f in used.iter() {
        let _ = writeln!(out, "bit<{}> {};//{}", f.bits(), f.name(), f.index() + 1);
    }
    // One register read per distinct feature, catalog order.
    for f in used.iter() {
        let _ = writeln!(out, "{}.read({},current_flow_id);", f.register(), f.name());
    }
    emit_subtree(model, model.root, 0, &mut out);
    Ok(out)
}

fn emit_subtree(model: &DecisionTreeModel, cur: ChildRef, indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    match cur {
        ChildRef::Leaf(i) => {
            let label = model.leaf_labels[i as usize];
            let _ = writeln!(out, "{pad}malicious_flag_register.write(current_flow_id,{label});");
        }
        ChildRef::Node(i) => {
            let n = &model.nodes[i as usize];
            let _ = writeln!(out, "{pad}if({} <= {}){{", n.feature.name(), n.threshold);
            emit_subtree(model, n.children[0], indent + 1, out);
            let _ = writeln!(out, "{pad}}} else {{");
            emit_subtree(model, n.children[1], indent + 1, out);
            let _ = writeln!(out, "{pad}}}");
        }
    }
}
