// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/errors.hpp"

namespace promptseg {

UnsupportedNiftiError::UnsupportedNiftiError(std::string field, const std::string& detail)
    : Error("unsupported NIfTI feature: " + field + " (" + detail + ")"), field_(std::move(field)) {}

}  // namespace promptseg
