#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "dtrade/data_model.hpp"
#include "dtrade/transport.hpp"

namespace dtrade {

/// Country x activity export values.
struct OutputMatrix {
    std::vector<std::string> countries;
    std::vector<std::string> activities;
    Eigen::MatrixXd values;
};

/// A labelled matrix after dropping empty rows and columns.
struct LabelledMatrix {
    std::vector<std::string> countries;
    std::vector<std::string> activities;
    Eigen::MatrixXd values;
    std::vector<std::string> dropped;  // "country:X" / "activity:Y"
};

/// R_cp = (X_cp / X_c) / (X_p / X). All-zero rows and columns are dropped first.
LabelledMatrix rca(const OutputMatrix& X);

/// M = 1 iff R >= 1; rows or columns left empty are dropped.
LabelledMatrix binarize(const LabelledMatrix& R);

/// Mtilde_cc' = sum_p M_cp M_c'p / (M_c M_p)
Eigen::MatrixXd mtilde(const Eigen::MatrixXd& M);

struct ComplexityScores {
    std::vector<std::string> countries;
    Eigen::VectorXd eci;         // z-scored
    Eigen::VectorXd eci_minmax;  // in [0, 1]
    std::vector<std::string> activities;
    Eigen::VectorXd pci;  // z-scored
    double lambda2 = 0.0;
    int map_iterations = 0;
    /// Largest gap between the eigenvector and the iterated-map result.
    double map_gap = 0.0;
};

/// Second eigenvector of Mtilde, z-scored and oriented to correlate
/// positively with diversity (negatively with mean ubiquity when diversity
/// is flat). PCI averages ECI over each activity's
/// countries, then is z-scored. The fixed point of the alternating
/// averaging map is computed too and must agree to 1e-8.
ComplexityScores eci_pci(const LabelledMatrix& M);

/// Zero-mean, unit sample-sd copy. Throws on a constant vector.
Eigen::VectorXd zscore(const Eigen::VectorXd& v);
/// (x - min) / (max - min). Throws on a constant vector.
Eigen::VectorXd minmax(const Eigen::VectorXd& v);

/// Physical exports by origin and HS4 code; columns are prefixed "hs4:".
OutputMatrix physical_output(const std::vector<PhysicalTradeEntry>& trade, Year year);
/// Digital exports by origin and sector; columns are prefixed "digital:".
OutputMatrix digital_output(const std::vector<FlowRow>& flows, Year year);
/// Column union over the union of countries (missing cells are zero).
OutputMatrix merge_digital(const OutputMatrix& physical, const OutputMatrix& digital);

bool is_digital_activity(const std::string& activity);

void write_output_triplets(const OutputMatrix& X, const std::string& path);

}  // namespace dtrade
