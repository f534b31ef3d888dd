#pragma once

#include "qprobe/categories.hpp"
#include "qprobe/corpus.hpp"
#include "qprobe/errors.hpp"
#include "qprobe/estimator.hpp"
#include "qprobe/pipeline.hpp"
#include "qprobe/prober.hpp"
#include "qprobe/random.hpp"
#include "qprobe/report.hpp"
#include "qprobe/rules.hpp"
#include "qprobe/searchdb.hpp"
#include "qprobe/text.hpp"
