//! Word pools for generated charts. Unanswerable questions draw from a pool
//! disjoint from every table pool.

pub(crate) struct Theme {
    pub title: &'static str,
    pub value_title: &'static str,
    pub categories: &'static [&'static str],
    pub series: &'static [&'static str],
}

pub(crate) const THEMES: &[Theme] = &[
    Theme {
        title: "Social media use by platform",
        value_title: "Share of adults",
        categories: &[
            "Snapchat", "Instagram", "Facebook", "Twitter", "YouTube", "TikTok", "Reddit", "LinkedIn",
            "Pinterest", "WhatsApp",
        ],
        series: &["Teens", "Adults", "Seniors"],
    },
    Theme {
        title: "Trade balance by country",
        value_title: "Billion dollars",
        categories: &[
            "France", "Germany", "Italy", "Spain", "Japan", "China", "India", "Brazil", "Canada", "Mexico",
            "Norway", "Poland",
        ],
        series: &["Exports", "Imports", "Tariffs"],
    },
    Theme {
        title: "Employment by sector",
        value_title: "Thousand jobs",
        categories: &[
            "Retail", "Energy", "Finance", "Health", "Tourism", "Mining", "Farming", "Education",
            "Transport", "Housing",
        ],
        series: &["Men", "Women", "Youth"],
    },
    Theme {
        title: "Opinion by age group",
        value_title: "Percent agreeing",
        categories: &[
            "Students", "Workers", "Parents", "Retirees", "Farmers", "Nurses", "Teachers", "Veterans",
            "Artists", "Drivers",
        ],
        series: &["Urban", "Rural", "Suburban"],
    },
];

pub(crate) const UNANSWERABLE_NAMES: &[&str] = &[
    "Atlantis", "Narnia", "Gondor", "Wakanda", "Lilliput", "Camelot", "Utopia", "Arcadia", "Elbonia",
    "Genovia",
];

pub(crate) const ORDINALS: &[&str] = &["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unanswerable_pool_is_disjoint() {
        for t in THEMES {
            for w in t.categories.iter().chain(t.series) {
                assert!(!UNANSWERABLE_NAMES.contains(w));
            }
        }
    }
}
