#pragma once

#include "denis/codet.hpp"
#include "denis/controller.hpp"
#include "denis/sim.hpp"
#include "denis/slicing.hpp"

#include <json.hpp>

namespace denis {

// JSON shapes of the northbound API. Field names are part of the contract:
//   plan:   {mode, slices: [{id, members, channel, border_router}], default_slice}
//   delta:  {moves: [{node, to_slice}], retunes: [{slice, channel}]}
//   pdr:    {sent, received, pdr, pdr_undefined, per_slice, drops, in_flight}
nlohmann::json to_json(const SlicePlan& plan);
SlicePlan plan_from_json(const nlohmann::json& j);
ReconfigurationDelta delta_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PdrReport& report);
nlohmann::json to_json(const ConnectivityReport& report);
nlohmann::json to_json(const std::map<NodeId, DensityClass>& density);
nlohmann::json to_json(const std::vector<NodeRecord>& nodes, const ConnectivityGraph& g);
nlohmann::json to_json(const FlowTables& flows);

}  // namespace denis
