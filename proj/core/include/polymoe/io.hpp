#pragma once

#include <json.hpp>
#include <string>

#include "polymoe/divergence.hpp"
#include "polymoe/em_fit.hpp"
#include "polymoe/moe.hpp"
#include "polymoe/synth.hpp"

namespace polymoe {

using json = nlohmann::json;

// %.17g rendering; round-trips IEEE doubles.
std::string format_double(double v);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

// Model file: {version, family, s, k, gate_w (row-major), pinned_expert,
// experts, x_scaling:{offset, scale}}; extra keys (meta) are ignored on read.
json model_to_json(const MoEParams& model);
MoEParams model_from_json(const json& j);

json fit_report_to_json(const FitReport& report);

// Dataset CSV with header x1,..,xs,y.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset& data);

// Target file: {family, kind, alpha (number or "inf"), s, params, px}.
json target_to_json(const TargetSpec& target);
TargetSpec target_from_json(const json& j);

json estimate_to_json(const DivergenceEstimate& e);
json hellinger_to_json(const HellingerEstimate& e);
json sandwich_to_json(const SandwichReport& r);

// FNV-1a over the canonical dump; 16 hex digits.
std::string config_hash(const json& j);

// Rejects unknown keys; `where` names the offending file in the error.
void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& where);

}  // namespace polymoe
