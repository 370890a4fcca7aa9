#pragma once

#include "srctrace/embedding_store.hpp"
#include "srctrace/error.hpp"
#include "srctrace/index_snapshot.hpp"
#include "srctrace/knn.hpp"
#include "srctrace/metrics.hpp"
#include "srctrace/ood.hpp"
#include "srctrace/protocol.hpp"
#include "srctrace/report.hpp"
#include "srctrace/rng.hpp"
