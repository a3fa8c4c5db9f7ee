/* Copyright 2026 The IDC Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef IDC_CLI_HPP_
#define IDC_CLI_HPP_

#include <iosfwd>
#include <string>

namespace idc {

// Relative output directories are placed under $IDC_OUTPUT_ROOT when it is set.
inline constexpr const char* kOutputRootEnv = "IDC_OUTPUT_ROOT";
std::string ResolveOutputDir(const std::string& dir);

// Subcommands: gen-labels, train, eval, attack, param-count, report.
// Returns 0 on success, 2 on bad usage and 1 on any other failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace idc

#endif  // IDC_CLI_HPP_
