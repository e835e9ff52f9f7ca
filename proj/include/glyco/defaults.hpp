#pragma once

namespace glyco::defaults {

extern const char* const element_table_text;
extern const char* const residue_registry_text;
extern const char* const run_settings_text;

} // namespace glyco::defaults
