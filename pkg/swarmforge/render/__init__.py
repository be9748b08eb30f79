# SVG frames and HTML charts
