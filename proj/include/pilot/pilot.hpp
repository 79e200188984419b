#pragma once

#include "pilot/condition.hpp"
#include "pilot/error.hpp"
#include "pilot/exec_model.hpp"
#include "pilot/hierarchy.hpp"
#include "pilot/policy.hpp"
#include "pilot/policy_text.hpp"
#include "pilot/risk_analyzer.hpp"
#include "pilot/scenario.hpp"
#include "pilot/service.hpp"
#include "pilot/timestamp.hpp"
