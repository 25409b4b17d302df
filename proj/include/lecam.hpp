#pragma once

#include "lecam/core.hpp"
#include "lecam/normal.hpp"
#include "lecam/funcspace.hpp"
#include "lecam/experiments.hpp"
#include "lecam/partition_haar.hpp"
#include "lecam/coupling.hpp"
#include "lecam/divergences.hpp"
#include "lecam/estimators.hpp"
#include "lecam/lowerbound.hpp"
#include "lecam/studies.hpp"
