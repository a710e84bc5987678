#pragma once

// Core library: metrics, partitioning, clustering, discrimination, optimizer,
// ingestion and reporting. The HTTP service (sto/service.hpp) and the CLI
// (sto/cli.hpp) are separate headers because they pull in httplib and CLI11.

#include "sto/clustering.hpp"
#include "sto/config.hpp"
#include "sto/dataset.hpp"
#include "sto/discrimination.hpp"
#include "sto/errors.hpp"
#include "sto/io.hpp"
#include "sto/metrics.hpp"
#include "sto/optimizer.hpp"
#include "sto/optimizer_types.hpp"
#include "sto/partition.hpp"
#include "sto/pipeline.hpp"
#include "sto/report_io.hpp"
#include "sto/score_index.hpp"
#include "sto/subgroups.hpp"
