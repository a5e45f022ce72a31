#pragma once

#include <json.hpp>

#include "syntaxshap/oracle.hpp"

// JSON shapes of the scoring protocol.
//   request:  {"tokens": [int], "keep": [bool], "strategy": "zero_attention",
//              "targets": [int], "top_k": int, "seed": int}
//   response: {"target_probs": [float], "top": [{"id": int, "prob": float}]}
//   meta:     {"model": str, "vocab_size": int, "max_tokens": int}
namespace syntaxshap {

nlohmann::json to_json(const ValueRequest& request);
ValueRequest request_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ValueResponse& response);
// Throws ProtocolError on missing or mistyped fields.
ValueResponse response_from_json(const nlohmann::json& j);

nlohmann::json to_json(const OracleMetadata& meta);
OracleMetadata metadata_from_json(const nlohmann::json& j);

}  // namespace syntaxshap
