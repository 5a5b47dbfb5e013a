#pragma once
// Scan-log ingestion: parsing pre/post inventory scans, differencing them into
// per-interval sales observations, and loading catalog and tract tables.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shelfrec/common.hpp"

namespace shelfrec::ingest {

enum class Phase { Pre, Post };

struct ScanEvent {
    StoreId store_id;
    DisplayId display_id;
    int visit_index = 0;
    TimePoint timestamp{};
    Phase phase = Phase::Pre;
    std::map<ProductId, long long> counts;

    bool operator==(const ScanEvent&) const = default;
};

struct SalesRecord {
    StoreId store_id;
    DisplayId display_id;
    ProductId product_id;
    TimePoint interval_end{};
    double timedelta_hours = 0.0;
    int quantity_faced = 1;
    double units_sold = 0.0;
    bool clamped = false;

    bool operator==(const SalesRecord&) const = default;
};

struct Product {
    ProductId product_id;
    std::string name;
    SubCategory sub_category = SubCategory::Sparkling;
    double height_mm = 0.0;
    double width_mm = 0.0;

    bool operator==(const Product&) const = default;
};

struct Tract {
    TractId tract_id;
    double lat = 0.0;
    double lon = 0.0;
    std::vector<double> demographics;

    bool operator==(const Tract&) const = default;
};

struct RowError {
    std::size_t line = 0;
    std::string message;
};

template <typename T>
struct Parsed {
    std::vector<T> items;
    std::vector<RowError> errors;
};

// CSV columns: store_id,display_id,scanned_datetime,phase,product_id,count.
// Rows become one ScanEvent per (display, timestamp, phase); visits are formed
// per display in timestamp order, a Pre opening a visit and the next Post closing it.
Parsed<ScanEvent> parse_scan_log(std::string_view text);

struct SalesDerivation {
    std::vector<SalesRecord> records;
    int skipped_incomplete_visits = 0;
    int skipped_nonpositive_intervals = 0;
};

// Units per facing per display; displays not listed use `default_depth`.
struct FacingDepth {
    int default_depth = 1;
    std::map<DisplayId, int> per_display;
    int depth_for(const DisplayId& d) const;
};

// Differences post(v-1) against pre(v) per product; output ordering is canonical
// (display, interval end, product) so the result does not depend on input order.
SalesDerivation derive_sales(const std::vector<ScanEvent>& events, const FacingDepth& depth = {});

// product_id,name,sub_category,height_mm,width_mm
Parsed<Product> load_catalog(std::string_view text);

// tract_id,lat,lon,d00..d{b-1}. Demographic columns are the ones whose header
// starts with 'd' followed by digits; `expected_b` (if set) is enforced per row.
Parsed<Tract> load_tracts(std::string_view text, std::optional<std::size_t> expected_b = std::nullopt);

std::string sales_to_csv(const std::vector<SalesRecord>& records);
Parsed<SalesRecord> sales_from_csv(std::string_view text);

std::string catalog_to_csv(const std::vector<Product>& products);
std::string tracts_to_csv(const std::vector<Tract>& tracts);
std::string scans_to_csv(const std::vector<ScanEvent>& events);

std::string demographic_column(std::size_t index);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace shelfrec::ingest
