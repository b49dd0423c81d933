mod common;

use common::*;

#[test]
fn cells_telescope_to_p() {
    check_telescoping().unwrap();
}

#[test]
fn expected_rate_forms_agree() {
    check_rate_two_forms().unwrap();
}

#[test]
fn per_draw_ranks_sum_exactly_and_match_p_order() {
    let (sum, order) = check_rank_sum_and_equivalence();
    sum.unwrap();
    order.unwrap();
}

#[test]
fn log_posterior_gradient_matches_closed_form() {
    println!("{}", check_gradient().unwrap());
}

#[test]
fn excess_variation_is_symmetric() {
    check_excess_symmetry().unwrap();
}

#[test]
fn u_index_increases_with_medals() {
    check_u_monotone().unwrap();
}
