#pragma once

// Straight-line reference for the three-model decision procedure, kept
// deliberately independent of lccde::arbitrate: plain if/else-if chains over
// the raw (class, confidence) pairs, no shared helpers, no traces.

#include <array>
#include <vector>

#include "lccde/core.hpp"

namespace testsupport {

inline lccde::ClassId decide_reference(const std::array<lccde::ClassId, 3>& cls,
                                       const std::array<double, 3>& conf,
                                       const std::vector<lccde::ModelIndex>& leader_of) {
    const lccde::ClassId l1 = cls[0], l2 = cls[1], l3 = cls[2];
    const double p1 = conf[0], p2 = conf[1], p3 = conf[2];

    if (l1 == l2 && l2 == l3) {
        return l1;
    } else if (l1 != l2 && l2 != l3 && l1 != l3) {
        std::vector<lccde::ClassId> class_list;
        std::vector<double> conf_list;
        if (leader_of[static_cast<std::size_t>(l1)] == 0) {
            class_list.push_back(l1);
            conf_list.push_back(p1);
        }
        if (leader_of[static_cast<std::size_t>(l2)] == 1) {
            class_list.push_back(l2);
            conf_list.push_back(p2);
        }
        if (leader_of[static_cast<std::size_t>(l3)] == 2) {
            class_list.push_back(l3);
            conf_list.push_back(p3);
        }
        if (class_list.size() == 1) {
            return class_list[0];
        } else {
            if (class_list.empty()) {
                class_list = {l1, l2, l3};
                conf_list = {p1, p2, p3};
            }
            double p_max = conf_list[0];
            for (double p : conf_list)
                if (p > p_max) p_max = p;
            if (conf_list[0] == p_max) {
                return class_list[0];
            } else if (conf_list[1] == p_max) {
                return class_list[1];
            } else {
                return class_list[2];
            }
        }
    } else {
        lccde::ClassId majority;
        if (l1 == l2 || l1 == l3) {
            majority = l1;
        } else {
            majority = l2;
        }
        const lccde::ModelIndex leader = leader_of[static_cast<std::size_t>(majority)];
        return cls[static_cast<std::size_t>(leader)];
    }
}

}  // namespace testsupport
