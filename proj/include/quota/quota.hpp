#pragma once

#include "quota/allocator.hpp"
#include "quota/assigner.hpp"
#include "quota/error.hpp"
#include "quota/io.hpp"
#include "quota/pipeline.hpp"
#include "quota/query.hpp"
#include "quota/sampler.hpp"
#include "quota/scorer.hpp"
#include "quota/types.hpp"
