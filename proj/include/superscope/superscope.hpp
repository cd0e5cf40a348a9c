#pragma once

#include "superscope/assignment.hpp"
#include "superscope/core.hpp"
#include "superscope/data_model.hpp"
#include "superscope/directions.hpp"
#include "superscope/evalmetrics.hpp"
#include "superscope/geometry.hpp"
#include "superscope/interpret.hpp"
#include "superscope/npy.hpp"
#include "superscope/oracle.hpp"
#include "superscope/pipeline.hpp"
#include "superscope/report.hpp"
#include "superscope/similarity.hpp"
#include "superscope/stats.hpp"
#include "superscope/svg.hpp"
#include "superscope/synergy.hpp"
#include "superscope/synthbench.hpp"
