#include "gridop/mlp.hpp"

#include <string>

namespace gridop {

std::string_view to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "leaky_relu";
}

std::string_view to_string(Architecture a) {
  return a == Architecture::modified_fc ? "modified_fc" : "plain";
}

Activation activation_from_string(std::string_view name) {
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "tanh") return Activation::tanh;
  throw Error("unknown activation '" + std::string(name) + "'");
}

Architecture architecture_from_string(std::string_view name) {
  if (name == "plain") return Architecture::plain;
  if (name == "modified_fc") return Architecture::modified_fc;
  throw Error("unknown architecture '" + std::string(name) + "'");
}

void NetworkSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw Error("network: dimensions must be >= 1");
  for (auto w : hidden_layers) {
    if (w < 1) throw Error("network: hidden widths must be >= 1");
  }
  if (activation == Activation::leaky_relu && !(leaky_slope > 0.0 && leaky_slope < 1.0))
    throw Error("network: leaky slope must lie in (0, 1)");
  if (architecture == Architecture::modified_fc) {
    for (auto w : hidden_layers) {
      if (w != hidden_layers.front())
        throw Error("network: modified_fc gates need equal hidden widths");
    }
  }
}

ParameterLayout ParameterLayout::for_spec(const NetworkSpec& spec) {
  spec.validate();
  ParameterLayout layout;
  Eigen::Index offset = 0;
  auto push = [&](Eigen::Index rows, Eigen::Index cols) {
    layout.blocks.push_back(AffineBlock{rows, cols, offset});
    offset = layout.blocks.back().end();
  };
  if (spec.architecture == Architecture::modified_fc && !spec.hidden_layers.empty()) {
    const Eigen::Index width = spec.hidden_layers.front();
    push(width, spec.input_dim);
    push(width, spec.input_dim);
    layout.has_encoders = true;
  }
  Eigen::Index prev = spec.input_dim;
  for (auto w : spec.hidden_layers) {
    push(w, prev);
    prev = w;
  }
  push(spec.output_dim, prev);
  layout.size = offset;
  return layout;
}

}  // namespace gridop
